//! Parity-check construction for hierarchical-local codes: the block-diagonal
//! layout, field-parameter selection, the single-global-parity variant, and
//! the per-pattern reduction machinery used for diagnostics.
//!
//! The parity-check matrix is
//!
//! ```text
//!   H = diag(H0, .., H0) over the t1 groups, with a global strip below;
//!   H0 = diag(M0, .., M0) over the t2 blocks, with the mid strip below.
//! ```
//!
//! M0 rows evaluate powers of a primitive base element at the points
//! {0, β, β^2, ..}; the mid strip rows are base-stride Frobenius powers of the
//! alpha grid; the global strip rows are mid-stride Frobenius powers of the
//! lambda grid (or, with a single global parity, the q^h2-th powers of the
//! alphas themselves).

use crate::galois::{tower_create, Element, FieldSpec, FieldTower, GaloisError, Level};
use crate::indep::{self, split_prime_power, IndepError};
use crate::matrix::{kwise_independent, IndexSet, Matrix, MatrixError};
use crate::model::{CodeParams, ErasurePattern, Family, GroupStructure, ModelError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("base field q = {q} is too small for n2 = {n2} evaluation points")]
    FieldTooSmall { q: u64, n2: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("single-global construction requires h1 = 1, got {0}")]
    WrongH1(usize),
    #[error("operation requires an {0} instance")]
    WrongFamily(&'static str),
    #[error("invalid field override: {0}")]
    BadQ(String),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Indep(#[from] IndepError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which construction the field parameters are selected for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionKind {
    /// Block layout with a full lambda grid for the global strip.
    General,
    /// h1 = 1 variant: the global row reuses the alphas, so everything lives
    /// in the mid field.
    SingleGlobal,
}

/// How the base field size is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QChoice {
    /// Smallest prime power strictly greater than n2 (the default).
    SmallestAboveN2,
    /// Smallest prime power >= n (the conservative reading).
    AtLeastN,
    /// Explicit override; must be a prime power >= n2.
    Fixed(u64),
}

pub fn smallest_prime_power_above(x: u64) -> u64 {
    let mut v = x + 1;
    loop {
        if split_prime_power(v).is_some() {
            return v;
        }
        v += 1;
    }
}

/// Field parameters and element grids for one construction run.
#[derive(Debug, Clone)]
pub struct ChosenParams {
    pub q: u64,
    pub m1: usize,
    pub m: usize,
    pub tower: FieldTower,
    pub beta: Element,
    /// t2 x n2 grid of mid elements (empty when no mid strip is needed).
    pub alphas: Vec<Vec<Element>>,
    /// t1 x t2 x n2 grid of top elements (empty unless General with h1 > 0).
    pub lambdas: Vec<Vec<Vec<Element>>>,
    /// Certified independence of the flattened alpha grid over the base field.
    pub alpha_kwise: usize,
    /// Certified independence of the flattened lambda grid over the mid field.
    pub lambda_kwise: usize,
}

/// Fallback scan ceiling for the greedy route; the BCH route is certified
/// before use, so this only guards a path that is not expected to run.
const GREEDY_DEGREE_SLACK: usize = 16;

/// Spec operation `choose_parameters`: pick q, build the alpha/lambda grids
/// from BCH parity-check columns at the independence degrees the sufficiency
/// lemma asks for, certify them, and assemble the tower.
pub fn choose_parameters(
    params: &CodeParams,
    kind: ConstructionKind,
    q_choice: QChoice,
) -> Result<ChosenParams, ConstructError> {
    if params.family() != Family::Hl {
        return Err(ConstructError::WrongFamily("HL"));
    }
    if kind == ConstructionKind::SingleGlobal && params.h1() != 1 {
        return Err(ConstructError::WrongH1(params.h1()));
    }
    let q = match q_choice {
        QChoice::SmallestAboveN2 => smallest_prime_power_above(params.n2() as u64),
        QChoice::AtLeastN => smallest_prime_power_above(params.n() as u64 - 1),
        QChoice::Fixed(q) => {
            if split_prime_power(q).is_none() {
                return Err(ConstructError::BadQ(format!("{q} is not a prime power")));
            }
            if q < params.n2() as u64 {
                return Err(ConstructError::FieldTooSmall { q, n2: params.n2() });
            }
            q
        }
    };
    let (p, s) = split_prime_power(q).expect("validated above");
    let spec = FieldSpec::new(p, s)?;

    let alpha_kwise = match kind {
        ConstructionKind::General => (params.delta() + 1) * params.h2(),
        ConstructionKind::SingleGlobal => (params.delta() + 1) * (params.h2() + 1),
    };
    let alpha_count = params.n2() * params.t2();
    let (alpha_cols, m1) = if alpha_kwise == 0 {
        (Vec::new(), 1)
    } else {
        match indep::bch_columns_base(&spec, alpha_count, alpha_kwise + 1) {
            Ok(raw) => (raw.columns, raw.degree),
            Err(IndepError::VerificationFailed { .. }) => {
                let set = indep::greedy_independent(
                    &spec,
                    alpha_count,
                    alpha_kwise,
                    alpha_count + GREEDY_DEGREE_SLACK,
                )?;
                (
                    set.elements.iter().map(|e| e.coeffs().to_vec()).collect(),
                    set.degree,
                )
            }
            Err(e) => return Err(e.into()),
        }
    };

    let lambda_kwise = match kind {
        ConstructionKind::General if params.h1() > 0 => {
            (params.delta() + 1) * (params.h2() + 1) * params.h1()
        }
        _ => 0,
    };
    let (lambda_cols, m) = if lambda_kwise == 0 {
        (Vec::new(), m1)
    } else {
        // the mid field must exist before the lambda columns can be built
        let prelim = tower_create(p, s, m1, m1)?;
        let raw = indep::bch_columns_mid(&spec, prelim.mid_modulus(), params.n(), lambda_kwise + 1)?;
        let m = m1 * raw.degree;
        (raw.columns, m)
    };

    let tower = tower_create(p, s, m1, m)?;
    let beta = tower.primitive_element();

    // s-major alpha grid
    let mut alphas = Vec::new();
    if !alpha_cols.is_empty() {
        for sblk in 0..params.t2() {
            let mut row = Vec::with_capacity(params.n2());
            for j in 0..params.n2() {
                let col = &alpha_cols[sblk * params.n2() + j];
                row.push(tower.el_from_ranks(Level::Mid, col.clone())?);
            }
            alphas.push(row);
        }
        let flat: Vec<Element> = alphas.iter().flatten().cloned().collect();
        let outcome = kwise_independent(&tower, &flat, alpha_kwise, Level::Base)?;
        if !outcome.independent {
            return Err(ConstructError::Indep(IndepError::VerificationFailed {
                k: alpha_kwise,
            }));
        }
    }

    // i-major, then s, then j lambda grid
    let mut lambdas = Vec::new();
    if !lambda_cols.is_empty() {
        for i in 0..params.t1() {
            let mut per_block = Vec::with_capacity(params.t2());
            for sblk in 0..params.t2() {
                let mut row = Vec::with_capacity(params.n2());
                for j in 0..params.n2() {
                    let col = &lambda_cols[(i * params.t2() + sblk) * params.n2() + j];
                    row.push(tower.el_from_ranks(Level::Top, col.concat())?);
                }
                per_block.push(row);
            }
            lambdas.push(per_block);
        }
        let flat: Vec<Element> = lambdas.iter().flatten().flatten().cloned().collect();
        let outcome = kwise_independent(&tower, &flat, lambda_kwise, Level::Mid)?;
        if !outcome.independent {
            return Err(ConstructError::Indep(IndepError::VerificationFailed {
                k: lambda_kwise,
            }));
        }
    }

    Ok(ChosenParams {
        q,
        m1,
        m,
        tower,
        beta,
        alphas,
        lambdas,
        alpha_kwise,
        lambda_kwise,
    })
}

/// Spec operation `build_M0`: δ x n2 base matrix whose columns evaluate
/// (1, y, y^2, ..) at the points {0, β, β^2, .., β^(n2-2)} — every δ columns
/// are independent.
pub fn build_m0(
    tower: &FieldTower,
    n2: usize,
    delta: usize,
    beta: &Element,
) -> Result<Matrix, ConstructError> {
    let q = tower.base().q();
    if (q as usize) < n2 {
        return Err(ConstructError::FieldTooSmall { q, n2 });
    }
    let mut m0 = Matrix::zero(tower, Level::Base, delta, n2);
    for row in 0..delta {
        if row == 0 {
            for c in 0..n2 {
                m0[(0, c)] = tower.one(Level::Base);
            }
        } else {
            for c in 1..n2 {
                m0[(row, c)] = tower.pow(beta, (row * c) as u64);
            }
        }
    }
    Ok(m0)
}

/// Spec operation `build_moore`: row l is the l-fold Frobenius image (at the
/// given stride) of the element row.
pub fn build_moore(
    tower: &FieldTower,
    elems: &[Element],
    rows: usize,
    stride: Level,
) -> Matrix {
    let level = elems.iter().map(|e| e.level()).max().unwrap_or(Level::Base);
    let mut current: Vec<Element> = elems.to_vec();
    let mut entries = Vec::with_capacity(rows * elems.len());
    for row in 0..rows {
        if row > 0 {
            current = current.iter().map(|e| tower.frobenius(e, stride)).collect();
        }
        entries.extend(current.iter().cloned());
    }
    Matrix::new(tower, level, rows, elems.len(), entries).expect("moore shape")
}

/// A concrete code: parameters, tower, parity-check matrix and the grids it
/// was assembled from. Derived (HDL) instances carry empty grids.
#[derive(Debug, Clone)]
pub struct CodeInstance {
    params: CodeParams,
    tower: FieldTower,
    h: Matrix,
    groups: GroupStructure,
    alphas: Vec<Vec<Element>>,
    lambdas: Vec<Vec<Vec<Element>>>,
    beta: Element,
}

impl CodeInstance {
    pub fn params(&self) -> &CodeParams {
        &self.params
    }
    pub fn tower(&self) -> &FieldTower {
        &self.tower
    }
    pub fn h(&self) -> &Matrix {
        &self.h
    }
    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }
    pub fn alphas(&self) -> &[Vec<Element>] {
        &self.alphas
    }
    pub fn lambdas(&self) -> &[Vec<Vec<Element>>] {
        &self.lambdas
    }
    pub fn beta(&self) -> &Element {
        &self.beta
    }

    /// Rows of H belonging to group i's block (its local rows then its mid
    /// rows).
    pub fn group_rows(&self, i: usize) -> std::ops::Range<usize> {
        let g = self.params.t2() * self.params.delta() + self.params.h2();
        i * g..(i + 1) * g
    }

    /// The h1 global rows at the bottom of H.
    pub fn global_rows(&self) -> std::ops::Range<usize> {
        let g = self.params.t2() * self.params.delta() + self.params.h2();
        let start = self.params.t1() * g;
        start..start + self.params.h1()
    }

    /// H's rows for group i restricted to group i's columns: the group-level
    /// parity check (local blocks plus mid strip).
    pub fn group_check(&self) -> Matrix {
        // identical for every group by construction; group 0 representative
        self.group_check_of(0)
    }

    pub fn group_check_of(&self, i: usize) -> Matrix {
        let cols = &self.groups.a[i];
        let rows = self.group_rows(i);
        let restricted = self.h.restrict(cols).expect("group columns in range");
        let mut entries = Vec::new();
        for r in rows {
            entries.extend(restricted.row(r).iter().cloned());
        }
        Matrix::new(
            &self.tower,
            self.h.level(),
            self.params.t2() * self.params.delta() + self.params.h2(),
            cols.len(),
            entries,
        )
        .expect("group check shape")
    }

    /// Structural invariants: local rows supported inside their block, mid
    /// rows inside their group, entry levels within the tower.
    pub fn validate_structure(&self) -> Result<(), ConstructError> {
        let p = &self.params;
        if self.h.rows() != p.parity_rows() || self.h.cols() != p.n() {
            return Err(ConstructError::ShapeMismatch(format!(
                "H is {}x{}, expected {}x{}",
                self.h.rows(),
                self.h.cols(),
                p.parity_rows(),
                p.n()
            )));
        }
        for i in 0..p.t1() {
            let rows = self.group_rows(i);
            for (off, r) in rows.enumerate() {
                let allowed: &IndexSet = if off < p.t2() * p.delta() {
                    &self.groups.b[i][off / p.delta().max(1)]
                } else {
                    &self.groups.a[i]
                };
                for c in 0..p.n() {
                    if !self.h[(r, c)].is_zero() && !allowed.contains(c + 1) {
                        return Err(ConstructError::ShapeMismatch(format!(
                            "row {r} has support outside its block at column {}",
                            c + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Spec operation `assemble_H`: the general block construction.
pub fn assemble_h(params: &CodeParams, chosen: &ChosenParams) -> Result<CodeInstance, ConstructError> {
    if params.family() != Family::Hl {
        return Err(ConstructError::WrongFamily("HL"));
    }
    let t1 = params.t1();
    let t2 = params.t2();
    let (n1, n2) = (params.n1(), params.n2());
    let (h1, h2, delta) = (params.h1(), params.h2(), params.delta());
    if h2 > 0 && (chosen.alphas.len() != t2 || chosen.alphas.iter().any(|r| r.len() != n2)) {
        return Err(ConstructError::ShapeMismatch("alpha grid must be t2 x n2".into()));
    }
    if h1 > 0
        && (chosen.lambdas.len() != t1
            || chosen
                .lambdas
                .iter()
                .any(|b| b.len() != t2 || b.iter().any(|r| r.len() != n2)))
    {
        return Err(ConstructError::ShapeMismatch("lambda grid must be t1 x t2 x n2".into()));
    }
    let tower = &chosen.tower;
    let m0 = build_m0(tower, n2, delta, &chosen.beta)?;

    let g_rows = t2 * delta + h2;
    let mut h = Matrix::zero(tower, Level::Top, t1 * g_rows + h1, params.n());
    for i in 0..t1 {
        let row0 = i * g_rows;
        let col0 = i * n1;
        for s in 0..t2 {
            h.place(row0 + s * delta, col0 + s * n2, &m0);
        }
        for s in 0..t2 {
            if h2 > 0 {
                let mi = build_moore(tower, &chosen.alphas[s], h2, Level::Base);
                h.place(row0 + t2 * delta, col0 + s * n2, &mi);
            }
        }
    }
    for i in 0..t1 {
        if h1 > 0 {
            for s in 0..t2 {
                let his = build_moore(tower, &chosen.lambdas[i][s], h1, Level::Mid);
                h.place(t1 * g_rows, i * n1 + s * n2, &his);
            }
        }
    }
    let instance = CodeInstance {
        params: *params,
        tower: chosen.tower.clone(),
        h,
        groups: params.groups(),
        alphas: chosen.alphas.clone(),
        lambdas: chosen.lambdas.clone(),
        beta: chosen.beta.clone(),
    };
    instance.validate_structure()?;
    Ok(instance)
}

/// Spec operation `build_h1_one`: the single-global-parity variant. The
/// global row holds the q^h2-th Frobenius powers of the same alphas used in
/// the mid strip, so the whole matrix lives over the mid field.
pub fn build_h1_one(params: &CodeParams, chosen: &ChosenParams) -> Result<CodeInstance, ConstructError> {
    if params.family() != Family::Hl {
        return Err(ConstructError::WrongFamily("HL"));
    }
    if params.h1() != 1 {
        return Err(ConstructError::WrongH1(params.h1()));
    }
    let needed = (params.delta() + 1) * (params.h2() + 1);
    if chosen.alpha_kwise < needed.min(params.n2() * params.t2()) {
        return Err(ConstructError::ShapeMismatch(format!(
            "alphas certified {}-wise, construction needs {}",
            chosen.alpha_kwise, needed
        )));
    }
    if chosen.alphas.len() != params.t2() || chosen.alphas.iter().any(|r| r.len() != params.n2()) {
        return Err(ConstructError::ShapeMismatch("alpha grid must be t2 x n2".into()));
    }
    let tower = &chosen.tower;
    let t1 = params.t1();
    let t2 = params.t2();
    let (n1, n2) = (params.n1(), params.n2());
    let (h2, delta) = (params.h2(), params.delta());
    let m0 = build_m0(tower, n2, delta, &chosen.beta)?;

    // alpha^(q^h2) row shared by every group strip
    let mut strip: Vec<Element> = chosen.alphas.iter().flatten().cloned().collect();
    for _ in 0..h2 {
        strip = strip.iter().map(|e| tower.frobenius(e, Level::Base)).collect();
    }

    let g_rows = t2 * delta + h2;
    let mut h = Matrix::zero(tower, Level::Top, t1 * g_rows + 1, params.n());
    for i in 0..t1 {
        let row0 = i * g_rows;
        let col0 = i * n1;
        for s in 0..t2 {
            h.place(row0 + s * delta, col0 + s * n2, &m0);
        }
        if h2 > 0 {
            for s in 0..t2 {
                let mi = build_moore(tower, &chosen.alphas[s], h2, Level::Base);
                h.place(row0 + t2 * delta, col0 + s * n2, &mi);
            }
        }
        for (c, e) in strip.iter().enumerate() {
            h[(t1 * g_rows, col0 + c)] = e.clone();
        }
    }
    let instance = CodeInstance {
        params: *params,
        tower: chosen.tower.clone(),
        h,
        groups: params.groups(),
        alphas: chosen.alphas.clone(),
        lambdas: Vec::new(),
        beta: chosen.beta.clone(),
    };
    instance.validate_structure()?;
    Ok(instance)
}

/// Construct an HL instance end to end.
pub fn construct_hl(
    params: &CodeParams,
    kind: ConstructionKind,
    q_choice: QChoice,
) -> Result<CodeInstance, ConstructError> {
    let chosen = choose_parameters(params, kind, q_choice)?;
    match kind {
        ConstructionKind::General => assemble_h(params, &chosen),
        ConstructionKind::SingleGlobal => build_h1_one(params, &chosen),
    }
}

// ---------------------------------------------------------------------------
// reduction trace
// ---------------------------------------------------------------------------

/// The per-pattern reduction data: eliminating the Δ erasures with the local
/// rows leaves the Ψ row (mid strip) and Φ row (global strip); eliminating
/// the Γ erasures with the mid rows leaves Θ.
#[derive(Debug, Clone)]
pub struct ReductionTrace {
    /// Per (i, s): the δ x (n2 - δ) elimination matrix over the base field.
    pub l: Vec<Vec<Matrix>>,
    /// Per group: the reduced mid-strip elements, Γ positions first.
    pub psi: Vec<Vec<Element>>,
    /// Per group: the h2-row Moore matrix over psi.
    pub f: Vec<Matrix>,
    /// Per group: the reduced global-strip elements, Γ positions first.
    pub phi: Vec<Vec<Element>>,
    /// Per group: (F|Γ)^-1 F|Γ̄, h2 x r1.
    pub z: Vec<Matrix>,
    /// The t1 * r1 fully reduced global-strip elements.
    pub theta: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceVerdict {
    Pass,
    /// F|Γ was singular for this group (counts as a failed pattern).
    SingularBlock { group: usize },
    /// Some Ψ_i was not h2-wise independent over the base field.
    PsiDependent { group: usize, witness: IndexSet },
    /// Θ was not h1-wise independent over the mid field.
    ThetaDependent { witness: IndexSet },
}

impl TraceVerdict {
    pub fn ok(&self) -> bool {
        matches!(self, TraceVerdict::Pass)
    }
}

/// Spec operation `reduction_trace`: evaluate the necessity conditions for
/// one (δ, h2) erasure pattern on a construction-shaped HL instance.
pub fn reduction_trace(
    instance: &CodeInstance,
    pattern: &ErasurePattern,
) -> Result<(ReductionTrace, TraceVerdict), ConstructError> {
    let params = instance.params();
    if params.family() != Family::Hl {
        return Err(ConstructError::WrongFamily("HL"));
    }
    pattern.validate(params)?;
    let tower = instance.tower();
    let (t1, t2) = (params.t1(), params.t2());
    let (n1, n2) = (params.n1(), params.n2());
    let (h1, h2, delta) = (params.h1(), params.h2(), params.delta());
    let m0 = build_m0(tower, n2, delta, instance.beta())?;

    let mut l_all = Vec::with_capacity(t1);
    let mut psi_all = Vec::with_capacity(t1);
    let mut f_all = Vec::with_capacity(t1);
    let mut phi_all = Vec::with_capacity(t1);
    let mut z_all = Vec::with_capacity(t1);
    let mut theta = Vec::new();
    let mut verdict = TraceVerdict::Pass;

    for i in 0..t1 {
        // the lambda role is played by the first global row's entries on this
        // group (for the single-global variant those are the alpha powers)
        let lambda_row: Option<Vec<Element>> = if h1 > 0 {
            let r = instance.global_rows().start;
            Some(
                (0..n1)
                    .map(|c| instance.h()[(r, i * n1 + c)].clone())
                    .collect(),
            )
        } else {
            None
        };

        let mut l_group = Vec::with_capacity(t2);
        // (group-local position, psi, phi)
        let mut reduced: Vec<(usize, Element, Option<Element>)> = Vec::new();
        for s in 0..t2 {
            let erased: Vec<usize> = pattern.delta[i][s].iter().map(|&j| j - 1).collect();
            let kept: Vec<usize> = (0..n2).filter(|c| !erased.contains(c)).collect();
            let m0_er = m0
                .restrict(&IndexSet::new(erased.iter().map(|&c| c + 1).collect()).unwrap())
                .unwrap_or_else(|_| Matrix::zero(tower, Level::Base, delta, 0));
            let m0_kept = m0
                .restrict(&IndexSet::new(kept.iter().map(|&c| c + 1).collect()).unwrap())
                .unwrap_or_else(|_| Matrix::zero(tower, Level::Base, delta, 0));
            let l_is = if delta == 0 {
                Matrix::zero(tower, Level::Base, 0, kept.len())
            } else {
                // every δ columns of M0 are independent, so this inverts
                m0_er.inverse(tower)?.mul(tower, &m0_kept)?
            };
            for (ci, &c) in kept.iter().enumerate() {
                let alpha_at = |col: usize| -> Option<&Element> {
                    instance.alphas().get(s).and_then(|r| r.get(col))
                };
                let psi = match alpha_at(c) {
                    Some(base) => {
                        let mut acc = base.clone();
                        for (d, &ec) in erased.iter().enumerate() {
                            if let Some(a_er) = alpha_at(ec) {
                                let prod = tower.mul(a_er, &l_is[(d, ci)]);
                                acc = tower.add(&acc, &prod);
                            }
                        }
                        Some(acc)
                    }
                    None => None,
                };
                let phi = lambda_row.as_ref().map(|row| {
                    let mut acc = row[s * n2 + c].clone();
                    for (d, &ec) in erased.iter().enumerate() {
                        let prod = tower.mul(&row[s * n2 + ec], &l_is[(d, ci)]);
                        acc = tower.add(&acc, &prod);
                    }
                    acc
                });
                reduced.push((s * n2 + c, psi.unwrap_or_else(|| tower.zero(Level::Mid)), phi));
            }
            l_group.push(l_is);
        }
        l_all.push(l_group);

        // split by Γ membership, Γ positions first
        let gamma_locs: Vec<usize> = pattern.gamma[i].iter().map(|&loc| loc - 1).collect();
        let mut order: Vec<usize> = Vec::with_capacity(reduced.len());
        for &g in &gamma_locs {
            let pos = reduced
                .iter()
                .position(|(loc, _, _)| *loc == g)
                .expect("gamma positions are unerased by validation");
            order.push(pos);
        }
        for (idx, _) in reduced.iter().enumerate() {
            if !order.contains(&idx) {
                order.push(idx);
            }
        }
        let psi: Vec<Element> = order.iter().map(|&idx| reduced[idx].1.clone()).collect();
        let phi: Vec<Element> = if h1 > 0 {
            order
                .iter()
                .map(|&idx| reduced[idx].2.clone().expect("phi computed when h1 > 0"))
                .collect()
        } else {
            Vec::new()
        };

        let f_i = build_moore(tower, &psi, h2, Level::Base);
        // Z_i = (F|Γ)^-1 F|Γ̄ and the reduced Θ contribution
        let r1 = psi.len() - h2;
        let mut z_i = Matrix::zero(tower, Level::Mid, h2, r1);
        let mut singular = false;
        if h2 > 0 {
            let f_gamma = f_i
                .restrict(&IndexSet::new((1..=h2).collect()).unwrap())
                .expect("range");
            let f_rest = f_i
                .restrict(&IndexSet::new((h2 + 1..=h2 + r1).collect()).unwrap())
                .expect("range");
            match f_gamma.inverse(tower) {
                Ok(inv) => z_i = inv.mul(tower, &f_rest)?,
                Err(MatrixError::Singular) => singular = true,
                Err(e) => return Err(e.into()),
            }
        }
        if singular {
            if verdict.ok() {
                verdict = TraceVerdict::SingularBlock { group: i };
            }
        } else if h1 > 0 {
            for c in 0..r1 {
                let mut acc = phi[h2 + c].clone();
                for row in 0..h2 {
                    let prod = tower.mul(&phi[row], &z_i[(row, c)]);
                    acc = tower.add(&acc, &prod);
                }
                theta.push(acc);
            }
        }

        if verdict.ok() && h2 > 0 {
            let outcome = kwise_independent(tower, &psi, h2, Level::Base)?;
            if !outcome.independent {
                verdict = TraceVerdict::PsiDependent {
                    group: i,
                    witness: outcome.witness.unwrap_or_else(IndexSet::empty),
                };
            }
        }

        psi_all.push(psi);
        f_all.push(f_i);
        phi_all.push(phi);
        z_all.push(z_i);
    }

    if verdict.ok() && h1 > 0 {
        // the single-global variant produces mid-level entries; the claim is
        // over the mid field, so lift into the (possibly degree-1) top field
        let lifted: Result<Vec<Element>, GaloisError> =
            theta.iter().map(|e| tower.embed(e, Level::Top)).collect();
        let outcome = kwise_independent(tower, &lifted?, h1, Level::Mid)?;
        if !outcome.independent {
            verdict = TraceVerdict::ThetaDependent {
                witness: outcome.witness.unwrap_or_else(IndexSet::empty),
            };
        }
    }

    Ok((
        ReductionTrace {
            l: l_all,
            psi: psi_all,
            f: f_all,
            phi: phi_all,
            z: z_all,
            theta,
        },
        verdict,
    ))
}

// ---------------------------------------------------------------------------
// instance bundle serialization
// ---------------------------------------------------------------------------

const PARAMS_FILE: &str = "params.cfg";
const TOWER_FILE: &str = "tower.txt";
const H_FILE: &str = "h.mtx";
const ALPHAS_FILE: &str = "alphas.grid";
const LAMBDAS_FILE: &str = "lambdas.grid";
const BETA_FILE: &str = "beta.txt";

fn render_tower(tower: &FieldTower) -> String {
    let base = tower.base();
    let base_mod: Vec<String> = base.modulus().iter().map(|c| c.to_string()).collect();
    let mid_mod: Vec<String> = tower
        .mid_modulus()
        .iter()
        .map(|&c| tower.render_element(&tower.el_base(c)))
        .collect();
    let top_mod: Vec<String> = tower
        .top_modulus()
        .iter()
        .map(|c| {
            let e = tower
                .el_from_ranks(Level::Mid, c.clone())
                .expect("modulus chunk width");
            tower.render_element(&e)
        })
        .collect();
    format!(
        "p={}\ns={}\nm1={}\nm={}\nbase_modulus={}\nmid_modulus={}\ntop_modulus={}\n",
        base.p(),
        base.s(),
        tower.m1(),
        tower.m(),
        base_mod.join(","),
        mid_mod.join(";"),
        top_mod.join(";")
    )
}

fn parse_tower(text: &str) -> Result<FieldTower, ConstructError> {
    let mut p = None;
    let mut s = None;
    let mut m1 = None;
    let mut m = None;
    let mut base_mod = None;
    let mut mid_mod_raw = None;
    let mut top_mod_raw = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConstructError::ShapeMismatch(format!("bad tower line {line:?}")))?;
        match k {
            "p" => p = v.parse::<u64>().ok(),
            "s" => s = v.parse::<usize>().ok(),
            "m1" => m1 = v.parse::<usize>().ok(),
            "m" => m = v.parse::<usize>().ok(),
            "base_modulus" => {
                let coeffs: Result<Vec<u64>, _> = v.split(',').map(|t| t.trim().parse()).collect();
                base_mod = coeffs.ok();
            }
            "mid_modulus" => mid_mod_raw = Some(v.to_string()),
            "top_modulus" => top_mod_raw = Some(v.to_string()),
            _ => {}
        }
    }
    let (p, s, m1, m, base_mod, mid_raw, top_raw) = match (p, s, m1, m, base_mod, mid_mod_raw, top_mod_raw)
    {
        (Some(a), Some(b), Some(c), Some(d), Some(e), Some(f), Some(g)) => (a, b, c, d, e, f, g),
        _ => return Err(ConstructError::ShapeMismatch("incomplete tower spec".into())),
    };
    let base = FieldSpec::with_modulus(p, s, base_mod)?;
    // a scratch tower provides element parsing for the modulus coefficients
    let scratch = FieldTower::create(p, s, m1, m1)?;
    let mid_modulus: Result<Vec<u32>, ConstructError> = mid_raw
        .split(';')
        .map(|tok| {
            let e = scratch.parse_element(tok.trim())?;
            if e.level() != Level::Base {
                return Err(ConstructError::ShapeMismatch(
                    "mid modulus coefficients must be base elements".into(),
                ));
            }
            Ok(e.coeffs()[0])
        })
        .collect();
    let top_modulus: Result<Vec<Vec<u32>>, ConstructError> = top_raw
        .split(';')
        .map(|tok| {
            let e = scratch.parse_element(tok.trim())?;
            if e.level() != Level::Mid {
                return Err(ConstructError::ShapeMismatch(
                    "top modulus coefficients must be mid elements".into(),
                ));
            }
            Ok(e.coeffs().to_vec())
        })
        .collect();
    Ok(FieldTower::with_moduli(base, m1, m, mid_modulus?, top_modulus?)?)
}

impl CodeInstance {
    /// Write the bundle (params, tower, H, grids, beta) into a directory.
    pub fn save(&self, dir: &Path) -> Result<(), ConstructError> {
        std::fs::create_dir_all(dir)?;
        let extras = crate::model::ConfigExtras {
            q: Some(self.tower.base().q()),
            seed: None,
        };
        std::fs::write(dir.join(PARAMS_FILE), crate::model::render_config(&self.params, &extras))?;
        std::fs::write(dir.join(TOWER_FILE), render_tower(&self.tower))?;
        std::fs::write(dir.join(H_FILE), self.h.render(&self.tower))?;

        let mut alphas = format!("rows={} cols={}\n", self.alphas.len(), self.params.n2());
        for row in &self.alphas {
            let parts: Vec<String> = row.iter().map(|e| self.tower.render_element(e)).collect();
            alphas.push_str(&parts.join(" "));
            alphas.push('\n');
        }
        std::fs::write(dir.join(ALPHAS_FILE), alphas)?;

        let mut lambdas = format!(
            "groups={} blocks={} cols={}\n",
            self.lambdas.len(),
            self.params.t2(),
            self.params.n2()
        );
        for per_block in &self.lambdas {
            for row in per_block {
                let parts: Vec<String> = row.iter().map(|e| self.tower.render_element(e)).collect();
                lambdas.push_str(&parts.join(" "));
                lambdas.push('\n');
            }
        }
        std::fs::write(dir.join(LAMBDAS_FILE), lambdas)?;
        std::fs::write(dir.join(BETA_FILE), format!("{}\n", self.tower.render_element(&self.beta)))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<CodeInstance, ConstructError> {
        let (params, _extras) =
            crate::model::parse_config(&std::fs::read_to_string(dir.join(PARAMS_FILE))?)?;
        let tower = parse_tower(&std::fs::read_to_string(dir.join(TOWER_FILE))?)?;
        let h = Matrix::parse(&tower, &std::fs::read_to_string(dir.join(H_FILE))?)?;

        let alphas_text = std::fs::read_to_string(dir.join(ALPHAS_FILE))?;
        let mut alpha_lines = alphas_text.lines();
        let _header = alpha_lines.next();
        let alphas: Result<Vec<Vec<Element>>, GaloisError> = alpha_lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(|t| tower.parse_element(t)).collect())
            .collect();
        let alphas = alphas?;

        let lambdas_text = std::fs::read_to_string(dir.join(LAMBDAS_FILE))?;
        let mut lambda_lines = lambdas_text.lines();
        let _header = lambda_lines.next();
        let flat: Result<Vec<Vec<Element>>, GaloisError> = lambda_lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(|t| tower.parse_element(t)).collect())
            .collect();
        let flat = flat?;
        let lambdas: Vec<Vec<Vec<Element>>> = if flat.is_empty() {
            Vec::new()
        } else {
            flat.chunks(params.t2()).map(|c| c.to_vec()).collect()
        };

        let beta_text = std::fs::read_to_string(dir.join(BETA_FILE))?;
        let beta = tower.parse_element(beta_text.trim())?;

        let instance = CodeInstance {
            groups: params.groups(),
            params,
            tower,
            h,
            alphas,
            lambdas,
            beta,
        };
        instance.validate_structure()?;
        Ok(instance)
    }

    /// Assemble an instance from parts (used by the derivation module).
    pub(crate) fn from_parts(
        params: CodeParams,
        tower: FieldTower,
        h: Matrix,
        alphas: Vec<Vec<Element>>,
        lambdas: Vec<Vec<Vec<Element>>>,
        beta: Element,
    ) -> Result<CodeInstance, ConstructError> {
        let instance = CodeInstance {
            groups: params.groups(),
            params,
            tower,
            h,
            alphas,
            lambdas,
            beta,
        };
        instance.validate_structure()?;
        Ok(instance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_patterns;

    #[test]
    fn m0_example_q5() {
        let t = tower_create(5, 1, 1, 1).unwrap();
        let beta = t.primitive_element();
        assert_eq!(beta, t.el_base(2));
        let m0 = build_m0(&t, 4, 2, &beta).unwrap();
        let expect: Vec<u32> = vec![1, 1, 1, 1, 0, 2, 4, 3];
        for (i, &v) in expect.iter().enumerate() {
            assert_eq!(m0[(i / 4, i % 4)], t.el_base(v));
        }
        // every 2x2 minor invertible, against a hand determinant oracle
        let cols: Vec<(u32, u32)> = (0..4).map(|c| (m0[(0, c)].coeffs()[0], m0[(1, c)].coeffs()[0])).collect();
        for a in 0..4 {
            for b in a + 1..4 {
                let det = (cols[a].0 as i64 * cols[b].1 as i64
                    - cols[a].1 as i64 * cols[b].0 as i64)
                    .rem_euclid(5);
                assert_ne!(det, 0, "minor ({a},{b})");
            }
        }

        // delta = 1: single all-ones row
        let m0 = build_m0(&t, 4, 1, &beta).unwrap();
        assert!((0..4).all(|c| m0[(0, c)] == t.one(Level::Base)));
        // delta = n2: square and invertible
        let m0 = build_m0(&t, 4, 4, &beta).unwrap();
        assert_eq!(m0.rank(&t), 4);
        // too-small field
        assert!(matches!(
            build_m0(&t, 6, 2, &beta).unwrap_err(),
            ConstructError::FieldTooSmall { .. }
        ));
    }

    #[test]
    fn moore_rows() {
        let t = tower_create(2, 1, 4, 4).unwrap();
        let elems: Vec<Element> = (1..5)
            .map(|r| {
                let mut v = vec![0u32; 4];
                v[r % 4] = 1;
                t.el_from_ranks(Level::Mid, v).unwrap()
            })
            .collect();
        let m = build_moore(&t, &elems, 1, Level::Base);
        assert_eq!(m.rows(), 1);
        for (c, e) in elems.iter().enumerate() {
            assert_eq!(&m[(0, c)], e);
        }
        // base-field elements are Frobenius-fixed: all rows equal
        let base_elems: Vec<Element> = vec![t.el_base(1), t.el_base(1)];
        let m = build_moore(&t, &base_elems, 3, Level::Base);
        for r in 0..3 {
            for c in 0..2 {
                assert_eq!(m[(r, c)], t.el_base(1));
            }
        }
    }

    #[test]
    fn choose_parameters_example1_single_global() {
        let params = CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap();
        let chosen =
            choose_parameters(&params, ConstructionKind::SingleGlobal, QChoice::SmallestAboveN2)
                .unwrap();
        assert_eq!(chosen.q, 5);
        assert_eq!(chosen.alpha_kwise, 6);
        // d = 7 over F_25: exponents {0,1,2,3,4} after coset reduction
        assert_eq!(chosen.m1, 9);
        assert_eq!(chosen.m, chosen.m1);
        assert!(chosen.lambdas.is_empty());
        assert_eq!(chosen.alphas.len(), 2);
        assert_eq!(chosen.alphas[0].len(), 4);
    }

    #[test]
    fn choose_parameters_general_alpha_degree() {
        let params = CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap();
        let chosen =
            choose_parameters(&params, ConstructionKind::General, QChoice::SmallestAboveN2).unwrap();
        // alphas: (δ+1)h2 = 3-wise over F_5, 8 of them: degree 5
        assert_eq!(chosen.alpha_kwise, 3);
        assert_eq!(chosen.m1, 5);
        // lambdas: (δ+1)(h2+1)h1 = 6-wise, 16 of them over F_{5^5}
        assert_eq!(chosen.lambda_kwise, 6);
        assert_eq!(chosen.m % chosen.m1, 0);
        assert_eq!(chosen.lambdas.len(), 2);
    }

    #[test]
    fn h2_zero_has_no_mid_strip() {
        let params = CodeParams::hl(4, 2, 2, 0, 0, 1).unwrap();
        let chosen =
            choose_parameters(&params, ConstructionKind::General, QChoice::SmallestAboveN2).unwrap();
        assert!(chosen.alphas.is_empty());
        assert_eq!(chosen.m1, 1);
        let inst = assemble_h(&params, &chosen).unwrap();
        assert_eq!(inst.h().rows(), params.parity_rows());
    }

    #[test]
    fn assemble_h_example1_shape() {
        let params = CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap();
        let chosen =
            choose_parameters(&params, ConstructionKind::SingleGlobal, QChoice::SmallestAboveN2)
                .unwrap();
        let inst = build_h1_one(&params, &chosen).unwrap();
        assert_eq!(inst.h().rows(), 11);
        assert_eq!(inst.h().cols(), 16);
        inst.validate_structure().unwrap();
        // global row: alpha^q since h2 = 1
        let t = inst.tower();
        let r = inst.global_rows().start;
        let expect = t.frobenius(&chosen.alphas[0][0], Level::Base);
        assert_eq!(inst.h()[(r, 0)], expect);

        // wrong-h1 is rejected
        let p2 = CodeParams::hl(4, 3, 2, 2, 1, 2).unwrap();
        let c2 = choose_parameters(&p2, ConstructionKind::General, QChoice::SmallestAboveN2).unwrap();
        assert!(matches!(
            build_h1_one(&p2, &c2).unwrap_err(),
            ConstructError::WrongH1(2)
        ));
    }

    #[test]
    fn strict_q_mode() {
        let params = CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap();
        let chosen =
            choose_parameters(&params, ConstructionKind::SingleGlobal, QChoice::AtLeastN).unwrap();
        assert_eq!(chosen.q, 16); // smallest prime power >= 16
        let fixed =
            choose_parameters(&params, ConstructionKind::SingleGlobal, QChoice::Fixed(7)).unwrap();
        assert_eq!(fixed.q, 7);
        assert!(choose_parameters(&params, ConstructionKind::SingleGlobal, QChoice::Fixed(6)).is_err());
        assert!(choose_parameters(&params, ConstructionKind::SingleGlobal, QChoice::Fixed(3)).is_err());
    }

    #[test]
    fn trace_shapes_example1() {
        let params = CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap();
        let inst = construct_hl(&params, ConstructionKind::SingleGlobal, QChoice::SmallestAboveN2)
            .unwrap();
        let pattern = enumerate_patterns(&params, false).next().unwrap();
        let (trace, verdict) = reduction_trace(&inst, &pattern).unwrap();
        assert_eq!(trace.psi[0].len(), 4); // r1 + h2
        assert_eq!(trace.psi[1].len(), 4);
        assert_eq!(trace.theta.len(), 6); // t1 * r1
        assert_eq!(trace.l[0][0].rows(), 2);
        assert_eq!(trace.l[0][0].cols(), 2);
        assert_eq!(trace.z[0].rows(), 1);
        assert_eq!(trace.z[0].cols(), 3);
        assert!(verdict.ok());
    }

    #[test]
    fn bundle_roundtrip() {
        let params = CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap();
        let inst = construct_hl(&params, ConstructionKind::SingleGlobal, QChoice::SmallestAboveN2)
            .unwrap();
        let dir = std::env::temp_dir().join(format!("hlmrc-bundle-{}", std::process::id()));
        inst.save(&dir).unwrap();
        let back = CodeInstance::load(&dir).unwrap();
        assert_eq!(back.h(), inst.h());
        assert_eq!(back.params(), inst.params());
        assert_eq!(back.alphas(), inst.alphas());
        assert_eq!(back.beta(), inst.beta());
        // byte-exact re-save
        let again = dir.join("again");
        back.save(&again).unwrap();
        for f in [PARAMS_FILE, TOWER_FILE, H_FILE, ALPHAS_FILE, LAMBDAS_FILE, BETA_FILE] {
            let a = std::fs::read(dir.join(f)).unwrap();
            let b = std::fs::read(again.join(f)).unwrap();
            assert_eq!(a, b, "file {f} differs");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
