//! Certified k-wise independent element multisets over a subfield.
//!
//! The primary route builds columns of a BCH-style parity-check matrix: rows
//! are powers γ^(i·j) of a sufficient-order γ in the extension field, for a
//! q-cyclotomic-coset-reduced exponent set i ∈ {0, .., d-2} (the all-ones
//! exponent-0 row is always kept), each row expanded into coordinates over
//! the claim's base field. The achieved degree is the expanded row count.
//! Every returned set is re-checked by `matrix::kwise_independent` before it
//! leaves this module; the greedy scan is the verified fallback.

use crate::combi::for_each_combination;
use crate::galois::{tower_create, Element, FieldSpec, FieldTower, GaloisError, Level};
use crate::matrix::{kwise_independent, ColumnSpace, MatrixError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndepError {
    #[error("constructed columns failed the independence check at k={k}")]
    VerificationFailed { k: usize },
    #[error("no {k}-wise independent set of {n} elements up to degree {cap}")]
    DegreeCapExceeded { n: usize, k: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Galois(#[from] GaloisError),
}

/// A multiset of extension-field elements together with its certified
/// independence level. `tower` is the minimal tower hosting the elements at
/// Mid level; the coefficient vectors transplant unchanged into any tower
/// with the same base field and mid degree.
#[derive(Debug, Clone)]
pub struct CertifiedSet {
    pub tower: FieldTower,
    pub elements: Vec<Element>,
    pub degree: usize,
    pub kwise: usize,
}

impl CertifiedSet {
    /// Header line plus one element per line.
    pub fn render(&self) -> String {
        let mut out = format!(
            "count={} kwise={} base_q={} degree={}\n",
            self.elements.len(),
            self.kwise,
            self.tower.base().q(),
            self.degree
        );
        for e in &self.elements {
            out.push_str(&self.tower.render_element(e));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<CertifiedSet, IndepError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| IndepError::InvalidArg("empty element list".into()))?;
        let mut count = None;
        let mut kwise = None;
        let mut base_q = None;
        let mut degree = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| IndepError::InvalidArg(format!("bad header token {tok:?}")))?;
            let v: u64 = v
                .parse()
                .map_err(|e| IndepError::InvalidArg(format!("bad header value: {e}")))?;
            match k {
                "count" => count = Some(v as usize),
                "kwise" => kwise = Some(v as usize),
                "base_q" => base_q = Some(v),
                "degree" => degree = Some(v as usize),
                _ => {}
            }
        }
        let (count, kwise, base_q, degree) = match (count, kwise, base_q, degree) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(IndepError::InvalidArg(format!("incomplete header {header:?}"))),
        };
        let (p, s) = split_prime_power(base_q)
            .ok_or_else(|| IndepError::InvalidArg(format!("base_q={base_q} is not a prime power")))?;
        let tower = tower_create(p, s, degree, degree)?;
        let elements: Result<Vec<Element>, GaloisError> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| tower.parse_element(l.trim()))
            .collect();
        let elements = elements?;
        if elements.len() != count {
            return Err(IndepError::InvalidArg(format!(
                "header count {count} but {} elements",
                elements.len()
            )));
        }
        Ok(CertifiedSet {
            tower,
            elements,
            degree,
            kwise,
        })
    }
}

/// q = p^s for prime p, if it is one.
pub fn split_prime_power(q: u64) -> Option<(u64, usize)> {
    if q < 2 {
        return None;
    }
    let mut n = q;
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut s = 0usize;
            while n % d == 0 {
                n /= d;
                s += 1;
            }
            return if n == 1 { Some((d, s)) } else { None };
        }
        d += 1;
    }
    Some((q, 1))
}

// ---------------------------------------------------------------------------
// generic BCH column engine
// ---------------------------------------------------------------------------

use crate::galois::CoefField;

/// Exponent representatives of {0, .., max_exp} under i ~ i*q (mod modulus).
fn coset_representatives(max_exp: u128, q: u128, modulus: u128) -> Vec<u128> {
    let mut kept = Vec::new();
    let mut seen = vec![false; (max_exp + 1) as usize];
    for i in 0..=max_exp {
        if seen[i as usize] {
            continue;
        }
        kept.push(i);
        let mut j = i;
        loop {
            j = j * q % modulus;
            if j == i {
                break;
            }
            if j <= max_exp {
                seen[j as usize] = true;
            }
        }
    }
    kept
}

pub(crate) struct BchRaw<C> {
    /// One coefficient vector (length `degree`) per requested column.
    pub columns: Vec<Vec<C>>,
    pub degree: usize,
    /// Independence level the construction is designed for (min(d-1, n)).
    pub kwise: usize,
}

pub(crate) fn bch_engine<F: CoefField>(
    f: &F,
    n_needed: usize,
    d: usize,
) -> Result<BchRaw<F::C>, IndepError> {
    if n_needed == 0 {
        return Err(IndepError::InvalidArg("n_needed must be >= 1".into()));
    }
    if d < 2 {
        return Err(IndepError::InvalidArg("designed distance must be >= 2".into()));
    }
    // independence beyond the multiset size is the same claim as full
    // independence; clamping keeps the exponent range (and the field) small
    let d_eff = d.min(n_needed + 1);
    let q = f.order();
    // smallest t with q^t - 1 >= n_needed
    let mut t = 1usize;
    let mut qt = q;
    while qt - 1 < n_needed as u128 {
        qt = qt.saturating_mul(q);
        t += 1;
    }
    let ext_modulus = crate::galois::smallest_irreducible(f, t);

    // polynomial arithmetic in F_{q^t}: vectors of length t over f
    let mul = |a: &[F::C], b: &[F::C]| -> Vec<F::C> {
        let mut prod = vec![f.zero(); 2 * t - 1];
        for (i, ai) in a.iter().enumerate() {
            if f.is_zero(ai) {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if f.is_zero(bj) {
                    continue;
                }
                prod[i + j] = f.add(&prod[i + j], &f.mul(ai, bj));
            }
        }
        for i in (t..prod.len()).rev() {
            let c = prod[i].clone();
            if f.is_zero(&c) {
                continue;
            }
            prod[i] = f.zero();
            for (j, mj) in ext_modulus.iter().take(t).enumerate() {
                if !f.is_zero(mj) {
                    let v = f.mul(&c, mj);
                    prod[i - t + j] = f.sub(&prod[i - t + j], &v);
                }
            }
        }
        prod.truncate(t);
        prod
    };
    let one_ext = {
        let mut v = vec![f.zero(); t];
        v[0] = f.one();
        v
    };

    // smallest canonical element whose first n_needed powers are distinct
    let gamma = {
        let mut found = None;
        let mut idx: u128 = 1;
        while idx < qt {
            let mut cand = Vec::with_capacity(t);
            let mut v = idx;
            for _ in 0..t {
                cand.push(f.from_index(v % q));
                v /= q;
            }
            let mut powers: Vec<Vec<F::C>> = vec![one_ext.clone()];
            let mut ok = true;
            for _ in 1..n_needed {
                let next = mul(powers.last().unwrap(), &cand);
                if powers.contains(&next) {
                    ok = false;
                    break;
                }
                powers.push(next);
            }
            if ok {
                found = Some(cand);
                break;
            }
            idx += 1;
        }
        found.ok_or_else(|| IndepError::InvalidArg("no generator of sufficient order".into()))?
    };

    let modulus_ord = qt - 1;
    let reps = coset_representatives((d_eff - 2) as u128, q, modulus_ord);
    let degree = 1 + (reps.len() - 1) * t;

    let mut columns: Vec<Vec<F::C>> = vec![Vec::with_capacity(degree); n_needed];
    for col in columns.iter_mut() {
        col.push(f.one()); // exponent-0 all-ones row
    }
    for &i in reps.iter().filter(|&&i| i != 0) {
        // gi = gamma^i, entries gi^j for column j
        let mut gi = one_ext.clone();
        for _ in 0..i {
            gi = mul(&gi, &gamma);
        }
        let mut entry = one_ext.clone();
        for col in columns.iter_mut() {
            col.extend(entry.iter().cloned());
            entry = mul(&entry, &gi);
        }
    }
    debug_assert!(columns.iter().all(|c| c.len() == degree));
    Ok(BchRaw {
        columns,
        degree,
        kwise: d_eff - 1,
    })
}

/// BCH engine over the base field: columns are base-rank vectors.
pub(crate) fn bch_columns_base(
    spec: &FieldSpec,
    n_needed: usize,
    d: usize,
) -> Result<BchRaw<u32>, IndepError> {
    let ops = crate::galois::BaseOps(spec);
    bch_engine(&ops, n_needed, d)
}

/// BCH engine over the mid field of a tower-in-progress: columns are vectors
/// of mid coefficient chunks.
pub(crate) fn bch_columns_mid(
    base: &FieldSpec,
    mid_modulus: &[u32],
    n_needed: usize,
    d: usize,
) -> Result<BchRaw<Vec<u32>>, IndepError> {
    let ops = crate::galois::MidOps::new(base, mid_modulus);
    bch_engine(&ops, n_needed, d)
}

/// Spec operation: n elements of `F_{q^m1}` that are (d-1)-wise independent
/// over `F_q`, built from BCH parity-check columns and certified before
/// returning.
pub fn bch_parity_columns(
    spec: &FieldSpec,
    n_needed: usize,
    d: usize,
) -> Result<CertifiedSet, IndepError> {
    let raw = bch_columns_base(spec, n_needed, d)?;
    let tower = tower_create(spec.p(), spec.s(), raw.degree, raw.degree)?;
    let elements: Result<Vec<Element>, GaloisError> = raw
        .columns
        .iter()
        .map(|c| tower.el_from_ranks(Level::Mid, c.clone()))
        .collect();
    let elements = elements?;
    let outcome = kwise_independent(&tower, &elements, raw.kwise, Level::Base)?;
    if !outcome.independent {
        return Err(IndepError::VerificationFailed { k: raw.kwise });
    }
    Ok(CertifiedSet {
        tower,
        elements,
        degree: raw.degree,
        kwise: raw.kwise,
    })
}

/// Spec operation: scan extension degrees upward, greedily keeping
/// canonical-order elements that preserve k-wise independence.
pub fn greedy_independent(
    spec: &FieldSpec,
    n_needed: usize,
    k: usize,
    degree_cap: usize,
) -> Result<CertifiedSet, IndepError> {
    if n_needed == 0 || k == 0 {
        return Err(IndepError::InvalidArg("n_needed and k must be >= 1".into()));
    }
    let q = spec.q() as u128;
    let mut lo = 1usize;
    let mut qt = q;
    while qt < n_needed as u128 {
        qt = qt.saturating_mul(q);
        lo += 1;
    }
    for degree in lo..=degree_cap {
        let tower = tower_create(spec.p(), spec.s(), degree, degree)?;
        let mut chosen: Vec<Element> = Vec::new();
        let mut decomposed: Vec<Vec<Element>> = Vec::new();
        for cand in tower.elements(Level::Mid).skip(1) {
            let cand_vec = tower.decompose(&cand, Level::Base)?;
            if extends_kwise(&tower, &decomposed, &cand_vec, k) {
                chosen.push(cand);
                decomposed.push(cand_vec);
                if chosen.len() == n_needed {
                    let outcome = kwise_independent(&tower, &chosen, k, Level::Base)?;
                    assert!(outcome.independent, "greedy invariant violated");
                    return Ok(CertifiedSet {
                        tower,
                        elements: chosen,
                        degree,
                        kwise: k.min(n_needed),
                    });
                }
            }
        }
    }
    Err(IndepError::DegreeCapExceeded {
        n: n_needed,
        k,
        cap: degree_cap,
    })
}

/// Would appending `cand` keep the set k-wise independent? Only subsets
/// containing the candidate need re-checking.
fn extends_kwise(
    tower: &FieldTower,
    decomposed: &[Vec<Element>],
    cand: &[Element],
    k: usize,
) -> bool {
    let kk = k.min(decomposed.len() + 1);
    if kk == 0 {
        return true;
    }
    let mut ok = true;
    for_each_combination(decomposed.len(), kk - 1, |idx| {
        let mut space = ColumnSpace::new(tower);
        for &i in idx {
            let indep = space.push(decomposed[i].clone());
            debug_assert!(indep, "existing set must be k-wise independent");
        }
        if !space.check(cand.to_vec()) {
            ok = false;
            return false;
        }
        true
    });
    ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_power_split() {
        assert_eq!(split_prime_power(5), Some((5, 1)));
        assert_eq!(split_prime_power(16), Some((2, 4)));
        assert_eq!(split_prime_power(12), None);
        assert_eq!(split_prime_power(1), None);
    }

    #[test]
    fn bch_d2_returns_nonzero_elements() {
        let spec = FieldSpec::new(2, 1).unwrap();
        let set = bch_parity_columns(&spec, 3, 2).unwrap();
        assert_eq!(set.elements.len(), 3);
        assert_eq!(set.kwise, 1);
        assert!(set.elements.iter().all(|e| !e.is_zero()));
        // all-ones exponent only: achieved degree 1
        assert_eq!(set.degree, 1);
    }

    #[test]
    fn bch_q5_n8_d4_matches_parameter_formula() {
        let spec = FieldSpec::new(5, 1).unwrap();
        let set = bch_parity_columns(&spec, 8, 4).unwrap();
        assert_eq!(set.elements.len(), 8);
        assert_eq!(set.kwise, 3);
        // 1 + ceil(4/5 * 2) * ceil(log_5 8) = 1 + 2*2
        assert_eq!(set.degree, 5);
        // independence re-checked externally against the naive oracle
        assert!(crate::matrix::kwise_independent_naive(
            &set.tower,
            &set.elements,
            3,
            Level::Base
        ));
    }

    #[test]
    fn bch_q2_n7_d3_hamming_style() {
        let spec = FieldSpec::new(2, 1).unwrap();
        let set = bch_parity_columns(&spec, 7, 3).unwrap();
        assert_eq!(set.elements.len(), 7);
        assert_eq!(set.kwise, 2);
        // exponent 0 plus the coset of exponent 1 expanded over F_8
        assert_eq!(set.degree, 4);
        // pairwise independence means all columns distinct and nonzero
        for (i, a) in set.elements.iter().enumerate() {
            assert!(!a.is_zero());
            for b in set.elements.iter().skip(i + 1) {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn bch_overlong_independence_is_clamped() {
        let spec = FieldSpec::new(3, 1).unwrap();
        // ask for 100-wise independence of 4 elements: same as full independence
        let set = bch_parity_columns(&spec, 4, 101).unwrap();
        assert_eq!(set.kwise, 4);
        // exponents {0,1,2} after coset reduction mod 8, expanded over F_9
        assert_eq!(set.degree, 5);
    }

    #[test]
    fn greedy_examples() {
        // n = q - 1, k = 1: the nonzero elements of F_q at degree 1
        let f5 = FieldSpec::new(5, 1).unwrap();
        let set = greedy_independent(&f5, 4, 1, 8).unwrap();
        assert_eq!(set.degree, 1);
        let ranks: Vec<u32> = set.elements.iter().map(|e| e.coeffs()[0]).collect();
        assert_eq!(ranks, vec![1, 2, 3, 4]);

        // 3 elements 3-wise independent over GF(2) need degree 3: {1, x, x^2}
        let f2 = FieldSpec::new(2, 1).unwrap();
        let set = greedy_independent(&f2, 3, 3, 8).unwrap();
        assert_eq!(set.degree, 3);
        let coeffs: Vec<&[u32]> = set.elements.iter().map(|e| e.coeffs()).collect();
        assert_eq!(coeffs, vec![&[1, 0, 0][..], &[0, 1, 0], &[0, 0, 1]]);

        // 4 elements 2-wise independent over GF(2): degree 2 holds only 3
        // nonzero elements, so degree 3 gets chosen
        let set = greedy_independent(&f2, 4, 2, 8).unwrap();
        assert_eq!(set.degree, 3);
        assert_eq!(set.elements.len(), 4);

        let err = greedy_independent(&f2, 3, 3, 2).unwrap_err();
        assert!(matches!(err, IndepError::DegreeCapExceeded { .. }));
    }

    #[test]
    fn determinism() {
        let spec = FieldSpec::new(5, 1).unwrap();
        let a = bch_parity_columns(&spec, 8, 4).unwrap();
        let b = bch_parity_columns(&spec, 8, 4).unwrap();
        assert_eq!(a.elements, b.elements);
        let g1 = greedy_independent(&spec, 6, 2, 6).unwrap();
        let g2 = greedy_independent(&spec, 6, 2, 6).unwrap();
        assert_eq!(g1.elements, g2.elements);
    }

    #[test]
    fn serialization_roundtrip() {
        let spec = FieldSpec::new(5, 1).unwrap();
        let set = bch_parity_columns(&spec, 8, 4).unwrap();
        let text = set.render();
        assert!(text.starts_with("count=8 kwise=3 base_q=5 degree=5\n"));
        let back = CertifiedSet::parse(&text).unwrap();
        assert_eq!(back.elements, set.elements);
        assert_eq!(back.render(), text);
    }
}
