//! Dense exact matrices over a tower level: rank, reduced row echelon form,
//! inversion, null space, column restriction and k-wise independence testing.
//!
//! Entries may sit at any level embeddable into the matrix's declared level;
//! arithmetic dispatches on the operands' native levels, so rows that are
//! really base- or mid-field data stay cheap inside elimination over a large
//! top field.

use crate::combi::{binomial, for_each_combination};
use crate::galois::{Element, FieldTower, GaloisError, Level};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix is singular")]
    Singular,
    #[error("column index {0} out of range 1..={1}")]
    IndexOutOfRange(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("level mismatch: {0}")]
    LevelMismatch(String),
    #[error("exhaustiveness budget exceeded: {subsets} subsets > {budget}")]
    BudgetExceeded { subsets: u128, budget: u128 },
    #[error(transparent)]
    Galois(#[from] GaloisError),
}

/// Sorted, distinct, 1-based coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut v: Vec<usize>) -> Result<IndexSet, MatrixError> {
        v.sort_unstable();
        for w in v.windows(2) {
            if w[0] == w[1] {
                return Err(MatrixError::ShapeMismatch(format!("duplicate index {}", w[0])));
            }
        }
        if v.first() == Some(&0) {
            return Err(MatrixError::IndexOutOfRange(0, usize::MAX));
        }
        Ok(IndexSet(v))
    }

    pub fn empty() -> IndexSet {
        IndexSet(Vec::new())
    }

    /// 1..=n
    pub fn full(n: usize) -> IndexSet {
        IndexSet((1..=n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Complement within 1..=n.
    pub fn complement(&self, n: usize) -> IndexSet {
        IndexSet((1..=n).filter(|i| !self.contains(*i)).collect())
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    pub fn intersect(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.iter().copied().filter(|i| other.contains(*i)).collect())
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        parts.join(",")
    }

    pub fn parse(s: &str) -> Result<IndexSet, MatrixError> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(IndexSet::empty());
        }
        let v: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
        IndexSet::new(v.map_err(|e| MatrixError::ShapeMismatch(format!("bad index list: {e}")))?)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.0
    }
}

/// Dense row-major matrix of tower elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    level: Level,
    rows: usize,
    cols: usize,
    entries: Vec<Element>,
}

impl Matrix {
    pub fn new(
        tower: &FieldTower,
        level: Level,
        rows: usize,
        cols: usize,
        entries: Vec<Element>,
    ) -> Result<Matrix, MatrixError> {
        if entries.len() != rows * cols {
            return Err(MatrixError::ShapeMismatch(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for e in &entries {
            if e.level() > level {
                return Err(MatrixError::LevelMismatch(format!(
                    "entry level {:?} above declared {:?}",
                    e.level(),
                    level
                )));
            }
            if e.coeffs().len() != tower.width(e.level()) {
                return Err(MatrixError::LevelMismatch("entry width inconsistent with tower".into()));
            }
        }
        Ok(Matrix {
            level,
            rows,
            cols,
            entries,
        })
    }

    pub fn zero(tower: &FieldTower, level: Level, rows: usize, cols: usize) -> Matrix {
        Matrix {
            level,
            rows,
            cols,
            entries: vec![tower.zero(Level::Base); rows * cols],
        }
    }

    pub fn identity(tower: &FieldTower, level: Level, n: usize) -> Matrix {
        let mut m = Matrix::zero(tower, level, n, n);
        for i in 0..n {
            m[(i, i)] = tower.one(Level::Base);
        }
        m
    }

    pub fn level(&self) -> Level {
        self.level
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Element] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Element> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    /// Vertical stack; column counts must agree.
    pub fn vstack(tower: &FieldTower, parts: &[&Matrix]) -> Result<Matrix, MatrixError> {
        let cols = parts.first().map(|m| m.cols).unwrap_or(0);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(MatrixError::ShapeMismatch("vstack column mismatch".into()));
        }
        let level = parts.iter().map(|m| m.level).max().unwrap_or(Level::Base);
        let rows = parts.iter().map(|m| m.rows).sum();
        let mut entries = Vec::with_capacity(rows * cols);
        for m in parts {
            entries.extend(m.entries.iter().cloned());
        }
        Matrix::new(tower, level, rows, cols, entries)
    }

    /// Write `block` at (row0, col0).
    pub fn place(&mut self, row0: usize, col0: usize, block: &Matrix) {
        assert!(row0 + block.rows <= self.rows && col0 + block.cols <= self.cols);
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(row0 + r, col0 + c)] = block[(r, c)].clone();
            }
        }
    }

    /// Restriction to the given 1-based columns, in the set's order.
    pub fn restrict(&self, cols: &IndexSet) -> Result<Matrix, MatrixError> {
        for c in cols.iter() {
            if c == 0 || c > self.cols {
                return Err(MatrixError::IndexOutOfRange(c, self.cols));
            }
        }
        let mut entries = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            for c in cols.iter() {
                entries.push(self[(r, c - 1)].clone());
            }
        }
        Ok(Matrix {
            level: self.level,
            rows: self.rows,
            cols: cols.len(),
            entries,
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut entries = Vec::with_capacity(self.rows * self.cols);
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self[(r, c)].clone());
            }
        }
        Matrix {
            level: self.level,
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn mul(&self, tower: &FieldTower, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::ShapeMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let level = self.level.max(other.level);
        let mut out = Matrix::zero(tower, level, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    let prod = tower.mul(a, b);
                    out[(i, j)] = tower.add(&out[(i, j)], &prod);
                }
            }
        }
        Ok(out)
    }

    /// Gaussian elimination with first-nonzero pivoting. Returns the echelon
    /// grid, the pivot (row, col) pairs, and whether back-substitution was
    /// applied (canonical rref with unit pivots, rows sorted by pivot column).
    fn eliminate(&self, tower: &FieldTower, reduce: bool) -> (Vec<Vec<Element>>, Vec<(usize, usize)>) {
        let mut grid: Vec<Vec<Element>> = (0..self.rows).map(|r| self.row(r).to_vec()).collect();
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut used = vec![false; self.rows];
        for col in 0..self.cols {
            let pr = (0..self.rows).find(|&r| !used[r] && !grid[r][col].is_zero());
            let Some(pr) = pr else { continue };
            used[pr] = true;
            pivots.push((pr, col));
            let pivot_inv = tower.inv(&grid[pr][col]).expect("pivot nonzero");
            for r in 0..self.rows {
                if r == pr || grid[r][col].is_zero() {
                    continue;
                }
                if !reduce && used[r] {
                    continue;
                }
                let factor = tower.mul(&grid[r][col], &pivot_inv);
                let (src, dst) = if r < pr {
                    let (lo, hi) = grid.split_at_mut(pr);
                    (&hi[0], &mut lo[r])
                } else {
                    let (lo, hi) = grid.split_at_mut(r);
                    (&lo[pr], &mut hi[0])
                };
                for c in col..self.cols {
                    if !src[c].is_zero() {
                        tower.sub_scaled_in_place(&mut dst[c], &factor, &src[c]);
                    }
                }
            }
        }
        if reduce {
            // normalize pivots to 1
            for &(r, c) in &pivots {
                let inv = tower.inv(&grid[r][c]).unwrap();
                for x in grid[r].iter_mut() {
                    if !x.is_zero() {
                        *x = tower.mul(x, &inv);
                    }
                }
                let _ = c;
            }
        }
        (grid, pivots)
    }

    pub fn rank(&self, tower: &FieldTower) -> usize {
        self.eliminate(tower, false).1.len()
    }

    /// Canonical reduced row echelon form: unit pivots, zeros above and below,
    /// rows ordered by pivot column, zero rows last.
    pub fn rref(&self, tower: &FieldTower) -> Matrix {
        let (grid, mut pivots) = self.eliminate(tower, true);
        pivots.sort_by_key(|&(_, c)| c);
        let mut entries = Vec::with_capacity(self.rows * self.cols);
        for &(r, _) in &pivots {
            entries.extend(grid[r].iter().cloned());
        }
        let zero_rows = self.rows - pivots.len();
        for _ in 0..zero_rows {
            entries.extend((0..self.cols).map(|_| tower.zero(Level::Base)));
        }
        Matrix {
            level: self.level,
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn inverse(&self, tower: &FieldTower) -> Result<Matrix, MatrixError> {
        if self.rows != self.cols {
            return Err(MatrixError::ShapeMismatch("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Matrix::zero(tower, self.level, n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug[(r, c)] = self[(r, c)].clone();
            }
            aug[(r, n + r)] = tower.one(Level::Base);
        }
        let reduced = aug.rref(tower);
        // full rank iff pivots occupy the left block's diagonal
        for i in 0..n {
            if !(0..n).all(|c| {
                let e = &reduced[(i, c)];
                if c == i {
                    !e.is_zero()
                } else {
                    e.is_zero()
                }
            }) {
                return Err(MatrixError::Singular);
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                entries.push(reduced[(r, n + c)].clone());
            }
        }
        Ok(Matrix {
            level: self.level,
            rows: n,
            cols: n,
            entries,
        })
    }

    /// Basis of the right null space, one vector per row:
    /// `self * N^T = 0`, `N.rows() = cols - rank`.
    pub fn null_space(&self, tower: &FieldTower) -> Matrix {
        let reduced = self.rref(tower);
        let mut pivot_col_of_row: Vec<usize> = Vec::new();
        let mut is_pivot_col = vec![false; self.cols];
        for r in 0..self.rows {
            if let Some(c) = (0..self.cols).find(|&c| !reduced[(r, c)].is_zero()) {
                pivot_col_of_row.push(c);
                is_pivot_col[c] = true;
            }
        }
        let free_cols: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot_col[c]).collect();
        let mut entries = Vec::with_capacity(free_cols.len() * self.cols);
        for &f in &free_cols {
            let mut v = vec![tower.zero(Level::Base); self.cols];
            v[f] = tower.one(Level::Base);
            for (r, &pc) in pivot_col_of_row.iter().enumerate() {
                // pivot is 1 in rref, so the pivot coordinate is -entry(r, f)
                v[pc] = tower.neg(&reduced[(r, f)]);
            }
            entries.extend(v);
        }
        Matrix {
            level: self.level,
            rows: free_cols.len(),
            cols: self.cols,
            entries,
        }
    }

    // -- file format ---------------------------------------------------------

    /// `q=<p>^<s> level=<b|m|t> rows=<r> cols=<c>` then one row per line,
    /// entries in the element format, space-separated.
    pub fn render(&self, tower: &FieldTower) -> String {
        let mut out = format!(
            "q={}^{} level={} rows={} cols={}\n",
            tower.base().p(),
            tower.base().s(),
            self.level.tag(),
            self.rows,
            self.cols
        );
        for r in 0..self.rows {
            let parts: Vec<String> = self.row(r).iter().map(|e| tower.render_element(e)).collect();
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(tower: &FieldTower, text: &str) -> Result<Matrix, MatrixError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| MatrixError::ShapeMismatch("empty matrix file".into()))?;
        let mut level = None;
        let mut rows = None;
        let mut cols = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| MatrixError::ShapeMismatch(format!("bad header token {tok:?}")))?;
            match k {
                "q" => {
                    let expect = format!("{}^{}", tower.base().p(), tower.base().s());
                    if v != expect {
                        return Err(MatrixError::ShapeMismatch(format!(
                            "matrix field {v} does not match tower {expect}"
                        )));
                    }
                }
                "level" => {
                    level = v.chars().next().and_then(Level::from_tag);
                }
                "rows" => rows = v.parse::<usize>().ok(),
                "cols" => cols = v.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (level, rows, cols) = match (level, rows, cols) {
            (Some(l), Some(r), Some(c)) => (l, r, c),
            _ => return Err(MatrixError::ShapeMismatch(format!("bad matrix header {header:?}"))),
        };
        let mut entries = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            if i >= rows {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(MatrixError::ShapeMismatch("trailing matrix rows".into()));
            }
            let row: Result<Vec<Element>, GaloisError> =
                line.split_whitespace().map(|t| tower.parse_element(t)).collect();
            let row = row?;
            if row.len() != cols {
                return Err(MatrixError::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        Matrix::new(tower, level, rows, cols, entries)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Element;
    fn index(&self, (r, c): (usize, usize)) -> &Element {
        &self.entries[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Element {
        &mut self.entries[r * self.cols + c]
    }
}

// ---------------------------------------------------------------------------
// incremental column space
// ---------------------------------------------------------------------------

/// Incremental independence tracker over column vectors. Columns are reduced
/// against the stored basis; each basis vector remembers its pivot position
/// (lowest level first, then lowest index, which keeps elimination factors
/// in the cheapest field that works).
pub struct ColumnSpace<'a> {
    tower: &'a FieldTower,
    basis: Vec<(usize, Vec<Element>)>,
}

impl<'a> ColumnSpace<'a> {
    pub fn new(tower: &'a FieldTower) -> ColumnSpace<'a> {
        ColumnSpace {
            tower,
            basis: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Reduce `col` against the basis in insertion order.
    fn reduce(&self, col: &mut [Element]) {
        for (pos, b) in &self.basis {
            if col[*pos].is_zero() {
                continue;
            }
            let factor = self
                .tower
                .mul(&col[*pos], &self.tower.inv(&b[*pos]).expect("basis pivot nonzero"));
            for (i, bv) in b.iter().enumerate() {
                if !bv.is_zero() {
                    self.tower.sub_scaled_in_place(&mut col[i], &factor, bv);
                }
            }
        }
    }

    /// Push a column; returns true when it was independent of the basis
    /// (and is now part of it).
    pub fn push(&mut self, col: Vec<Element>) -> bool {
        let mut col = col;
        self.reduce(&mut col);
        let mut pivot: Option<(Level, usize)> = None;
        for (i, e) in col.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let key = (e.level(), i);
            if pivot.map(|p| key < p).unwrap_or(true) {
                pivot = Some(key);
            }
        }
        match pivot {
            Some((_, pos)) => {
                self.basis.push((pos, col));
                true
            }
            None => false,
        }
    }

    /// Would `col` be independent? Non-destructive variant of `push`.
    pub fn check(&self, col: Vec<Element>) -> bool {
        let mut col = col;
        self.reduce(&mut col);
        col.iter().any(|e| !e.is_zero())
    }

    /// Drop basis vectors beyond `dim` (stack discipline for DFS searches).
    pub fn truncate(&mut self, dim: usize) {
        self.basis.truncate(dim);
    }
}

// ---------------------------------------------------------------------------
// k-wise independence
// ---------------------------------------------------------------------------

/// Default exhaustiveness budget: beyond this many subsets the check errors
/// rather than silently sampling.
pub const KWISE_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KwiseOutcome {
    pub independent: bool,
    /// 1-based positions into the input multiset of a dependent subset.
    pub witness: Option<IndexSet>,
}

/// Is every subset of size min(k, |S|) of the multiset linearly independent
/// over `base_level`? Elements are decomposed into coordinate vectors over
/// `base_level` first. The subset walk shares elimination prefixes, so the
/// cost is one column reduction per visited lexicographic prefix.
pub fn kwise_independent(
    tower: &FieldTower,
    elems: &[Element],
    k: usize,
    base_level: Level,
) -> Result<KwiseOutcome, MatrixError> {
    kwise_independent_budgeted(tower, elems, k, base_level, KWISE_BUDGET)
}

pub fn kwise_independent_budgeted(
    tower: &FieldTower,
    elems: &[Element],
    k: usize,
    base_level: Level,
    budget: u128,
) -> Result<KwiseOutcome, MatrixError> {
    let n = elems.len();
    let kk = k.min(n);
    if kk == 0 {
        return Ok(KwiseOutcome {
            independent: true,
            witness: None,
        });
    }
    for e in elems {
        if e.level() <= base_level {
            return Err(MatrixError::LevelMismatch(format!(
                "element level {:?} not above base level {:?}",
                e.level(),
                base_level
            )));
        }
    }
    let subsets = binomial(n, kk);
    if subsets > budget {
        return Err(MatrixError::BudgetExceeded { subsets, budget });
    }
    let cols: Vec<Vec<Element>> = elems
        .iter()
        .map(|e| tower.decompose(e, base_level).expect("level checked above"))
        .collect();

    // lexicographic DFS over index prefixes with a shared column space; the
    // first dependent prefix completes to the lexicographically first
    // dependent subset of size kk
    let mut space = ColumnSpace::new(tower);
    let mut stack: Vec<usize> = Vec::new();
    let mut witness: Option<Vec<usize>> = None;
    fn dfs(
        space: &mut ColumnSpace,
        cols: &[Vec<Element>],
        stack: &mut Vec<usize>,
        kk: usize,
        start: usize,
        witness: &mut Option<Vec<usize>>,
    ) -> bool {
        if stack.len() == kk {
            return true;
        }
        let n = cols.len();
        let remaining = kk - stack.len();
        for i in start..=(n - remaining) {
            let dim = space.dim();
            stack.push(i);
            if space.push(cols[i].clone()) {
                if !dfs(space, cols, stack, kk, i + 1, witness) {
                    return false;
                }
                space.truncate(dim);
            } else {
                // complete the dependent prefix canonically
                let mut w = stack.clone();
                let mut next = i + 1;
                while w.len() < kk {
                    w.push(next);
                    next += 1;
                }
                *witness = Some(w);
                stack.pop();
                return false;
            }
            stack.pop();
        }
        true
    }
    let independent = dfs(&mut space, &cols, &mut stack, kk, 0, &mut witness);
    Ok(KwiseOutcome {
        independent,
        witness: witness
            .map(|w| IndexSet::new(w.into_iter().map(|i| i + 1).collect()).expect("distinct")),
    })
}

/// Oracle-style k-wise check: every size-min(k,|S|) subset gets a fresh rank
/// computation. Quadratically slower than `kwise_independent`; used by tests
/// as an independent route.
pub fn kwise_independent_naive(
    tower: &FieldTower,
    elems: &[Element],
    k: usize,
    base_level: Level,
) -> bool {
    let n = elems.len();
    let kk = k.min(n);
    if kk == 0 {
        return true;
    }
    let cols: Vec<Vec<Element>> = elems
        .iter()
        .map(|e| tower.decompose(e, base_level).expect("level"))
        .collect();
    let mut ok = true;
    for_each_combination(n, kk, |idx| {
        let mut space = ColumnSpace::new(tower);
        for &i in idx {
            if !space.push(cols[i].clone()) {
                ok = false;
                return false;
            }
        }
        true
    });
    ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::tower_create;

    fn f5() -> FieldTower {
        tower_create(5, 1, 1, 1).unwrap()
    }

    fn m_from_ranks(t: &FieldTower, rows: usize, cols: usize, ranks: &[u32]) -> Matrix {
        let entries: Vec<Element> = ranks.iter().map(|&r| t.el_base(r)).collect();
        Matrix::new(t, Level::Base, rows, cols, entries).unwrap()
    }

    #[test]
    fn identity_rank_and_inverse() {
        let t = f5();
        let id = Matrix::identity(&t, Level::Base, 3);
        assert_eq!(id.rank(&t), 3);
        assert_eq!(id.inverse(&t).unwrap(), id);
    }

    #[test]
    fn proportional_rows_have_rank_one() {
        let t = f5();
        let m = m_from_ranks(&t, 2, 2, &[1, 1, 2, 2]);
        assert_eq!(m.rank(&t), 1);
        assert_eq!(m.inverse(&t).unwrap_err(), MatrixError::Singular);
    }

    #[test]
    fn rref_canonical_form() {
        let t = f5();
        let m = m_from_ranks(&t, 2, 3, &[2, 4, 1, 1, 2, 2]);
        let r = m.rref(&t);
        // row-reduce by hand: [[2,4,1],[1,2,2]] -> [[1,2,0],[0,0,1]]
        let expect = m_from_ranks(&t, 2, 3, &[1, 2, 0, 0, 0, 1]);
        assert_eq!(r, expect);
    }

    #[test]
    fn null_space_annihilates() {
        let t = f5();
        let m = m_from_ranks(&t, 2, 4, &[1, 2, 3, 4, 0, 1, 1, 0]);
        let n = m.null_space(&t);
        assert_eq!(n.rows(), 4 - m.rank(&t));
        let prod = m.mul(&t, &n.transpose()).unwrap();
        assert!((0..prod.rows()).all(|r| prod.row(r).iter().all(|e| e.is_zero())));
    }

    #[test]
    fn restrict_selects_columns() {
        let t = f5();
        let m = m_from_ranks(&t, 2, 4, &[1, 2, 3, 4, 0, 1, 1, 0]);
        let all = m.restrict(&IndexSet::full(4)).unwrap();
        assert_eq!(all, m);
        let sub = m.restrict(&IndexSet::new(vec![2, 4]).unwrap()).unwrap();
        assert_eq!(sub, m_from_ranks(&t, 2, 2, &[2, 4, 1, 0]));
        assert!(matches!(
            m.restrict(&IndexSet::new(vec![5]).unwrap()).unwrap_err(),
            MatrixError::IndexOutOfRange(5, 4)
        ));
    }

    #[test]
    fn kwise_gf4_examples() {
        // S = {1, x, x+1} in GF(4) over GF(2)
        let t = tower_create(2, 1, 2, 2).unwrap();
        let s: Vec<Element> = [vec![1, 0], vec![0, 1], vec![1, 1]]
            .into_iter()
            .map(|v| t.el_from_ranks(Level::Mid, v).unwrap())
            .collect();
        let two = kwise_independent(&t, &s, 2, Level::Base).unwrap();
        assert!(two.independent);
        let three = kwise_independent(&t, &s, 3, Level::Base).unwrap();
        assert!(!three.independent);
        assert_eq!(three.witness.unwrap(), IndexSet::new(vec![1, 2, 3]).unwrap());

        // any multiset containing zero fails at k = 1
        let with_zero = vec![t.zero(Level::Mid), s[0].clone()];
        let out = kwise_independent(&t, &with_zero, 1, Level::Base).unwrap();
        assert!(!out.independent);
        assert_eq!(out.witness.unwrap(), IndexSet::new(vec![1]).unwrap());
    }

    #[test]
    fn kwise_budget_is_enforced() {
        let t = tower_create(2, 1, 2, 2).unwrap();
        let s: Vec<Element> = (0..40)
            .map(|i| t.el_from_ranks(Level::Mid, vec![1, (i % 2) as u32]).unwrap())
            .collect();
        let err = kwise_independent_budgeted(&t, &s, 20, Level::Base, 1000).unwrap_err();
        assert!(matches!(err, MatrixError::BudgetExceeded { .. }));
    }

    #[test]
    fn column_space_matches_rank() {
        let t = f5();
        let m = m_from_ranks(&t, 3, 5, &[1, 2, 3, 4, 0, 2, 4, 1, 3, 0, 0, 0, 1, 1, 1]);
        let mut cs = ColumnSpace::new(&t);
        let mut rank = 0;
        for c in 0..m.cols() {
            if cs.push(m.column(c)) {
                rank += 1;
            }
        }
        assert_eq!(rank, m.rank(&t));
    }

    #[test]
    fn matrix_file_roundtrip() {
        let t = tower_create(2, 2, 2, 4).unwrap();
        let mut m = Matrix::zero(&t, Level::Top, 2, 3);
        m[(0, 0)] = t.el_base(3);
        m[(0, 2)] = t.one(Level::Mid);
        m[(1, 1)] = t.one(Level::Top);
        let text = m.render(&t);
        let back = Matrix::parse(&t, &text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.render(&t), text);
    }
}
