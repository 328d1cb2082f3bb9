//! Exact arithmetic in a three-level finite-field tower `F_q ⊂ F_{q^m1} ⊂ F_{q^m}`.
//!
//! The base field `F_q` (q = p^s) is represented by element *ranks*: an element
//! with little-endian `F_p` coefficient vector `(d0, .., d_{s-1})` has rank
//! `d0 + d1*p + ...`. Mid elements are length-`m1` vectors of base ranks, top
//! elements length-`m` vectors (`m/m1` mid chunks laid out little-endian).
//! All moduli are the lexicographically smallest monic irreducibles at their
//! level (coefficients compared low-degree-first), so identical tower
//! parameters always produce identical representations.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

/// Largest base field for which full add/mul/inv tables are precomputed.
const TABLE_LIMIT: u64 = 512;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GaloisError {
    #[error("{0} is not prime")]
    NonPrime(u64),
    #[error("mid degree {m1} does not divide top degree {m}")]
    DivisibilityViolation { m1: usize, m: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("level mismatch: {0}")]
    LevelMismatch(String),
    #[error("field too large: {0}")]
    FieldTooLarge(String),
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Position in the tower. `Base` is `F_q`, `Mid` is `F_{q^m1}`, `Top` is `F_{q^m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Base,
    Mid,
    Top,
}

impl Level {
    pub fn tag(self) -> char {
        match self {
            Level::Base => 'b',
            Level::Mid => 'm',
            Level::Top => 't',
        }
    }

    pub fn from_tag(c: char) -> Option<Level> {
        match c {
            'b' => Some(Level::Base),
            'm' => Some(Level::Mid),
            't' => Some(Level::Top),
            _ => None,
        }
    }
}

/// A field element at some tower level, stored as base-field ranks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Element {
    level: Level,
    c: Vec<u32>,
}

impl Element {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }
}

// ---------------------------------------------------------------------------
// generic polynomial arithmetic over an abstract coefficient field
// ---------------------------------------------------------------------------

/// Coefficient-field operations used by the polynomial helpers. Implemented by
/// the prime field (u64 residues), the base field (u32 ranks) and the mid
/// field (rank vectors), so modulus searches and inversions share one engine.
pub(crate) trait CoefField {
    type C: Clone + PartialEq + std::fmt::Debug;
    fn zero(&self) -> Self::C;
    fn one(&self) -> Self::C;
    fn is_zero(&self, a: &Self::C) -> bool;
    fn add(&self, a: &Self::C, b: &Self::C) -> Self::C;
    fn sub(&self, a: &Self::C, b: &Self::C) -> Self::C;
    fn mul(&self, a: &Self::C, b: &Self::C) -> Self::C;
    fn inv(&self, a: &Self::C) -> Self::C;
    /// Number of field elements, for Frobenius exponents and sieves.
    fn order(&self) -> u128;
    /// i-th element in canonical (integer-rank) order.
    fn from_index(&self, i: u128) -> Self::C;
}

struct PrimeOps {
    p: u64,
}

impl CoefField for PrimeOps {
    type C = u64;
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.p
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        (a + self.p - b) % self.p
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a * b % self.p
    }
    fn inv(&self, a: &u64) -> u64 {
        // Fermat; p is prime and a nonzero.
        debug_assert!(*a != 0);
        let mut r = 1u64;
        let mut base = *a;
        let mut e = self.p - 2;
        while e > 0 {
            if e & 1 == 1 {
                r = r * base % self.p;
            }
            base = base * base % self.p;
            e >>= 1;
        }
        r
    }
    fn order(&self) -> u128 {
        self.p as u128
    }
    fn from_index(&self, i: u128) -> u64 {
        i as u64
    }
}

pub(crate) struct BaseOps<'a>(pub &'a FieldSpec);

impl CoefField for BaseOps<'_> {
    type C = u32;
    fn zero(&self) -> u32 {
        0
    }
    fn one(&self) -> u32 {
        1
    }
    fn is_zero(&self, a: &u32) -> bool {
        *a == 0
    }
    fn add(&self, a: &u32, b: &u32) -> u32 {
        self.0.add(*a, *b)
    }
    fn sub(&self, a: &u32, b: &u32) -> u32 {
        self.0.sub(*a, *b)
    }
    fn mul(&self, a: &u32, b: &u32) -> u32 {
        self.0.mul(*a, *b)
    }
    fn inv(&self, a: &u32) -> u32 {
        self.0.inv(*a).expect("inverse of zero")
    }
    fn order(&self) -> u128 {
        self.0.q as u128
    }
    fn from_index(&self, i: u128) -> u32 {
        i as u32
    }
}

/// Mid-field arithmetic over (base, mid_modulus); usable before the full
/// tower exists, which the top-modulus search requires.
pub(crate) struct MidOps<'a> {
    base: &'a FieldSpec,
    modulus: &'a [u32],
}

impl<'a> MidOps<'a> {
    pub(crate) fn new(base: &'a FieldSpec, modulus: &'a [u32]) -> MidOps<'a> {
        MidOps { base, modulus }
    }

    fn m1(&self) -> usize {
        self.modulus.len() - 1
    }
}

impl CoefField for MidOps<'_> {
    type C = Vec<u32>;
    fn zero(&self) -> Vec<u32> {
        vec![0; self.m1()]
    }
    fn one(&self) -> Vec<u32> {
        let mut v = vec![0; self.m1()];
        v[0] = 1;
        v
    }
    fn is_zero(&self, a: &Vec<u32>) -> bool {
        a.iter().all(|&x| x == 0)
    }
    fn add(&self, a: &Vec<u32>, b: &Vec<u32>) -> Vec<u32> {
        a.iter().zip(b).map(|(x, y)| self.base.add(*x, *y)).collect()
    }
    fn sub(&self, a: &Vec<u32>, b: &Vec<u32>) -> Vec<u32> {
        a.iter().zip(b).map(|(x, y)| self.base.sub(*x, *y)).collect()
    }
    fn mul(&self, a: &Vec<u32>, b: &Vec<u32>) -> Vec<u32> {
        mid_mul_raw(self.base, self.modulus, a, b)
    }
    fn inv(&self, a: &Vec<u32>) -> Vec<u32> {
        mid_inv_raw(self.base, self.modulus, a).expect("inverse of zero")
    }
    fn order(&self) -> u128 {
        (self.base.q as u128)
            .checked_pow(self.m1() as u32)
            .expect("mid field order overflows u128")
    }
    fn from_index(&self, i: u128) -> Vec<u32> {
        let q = self.base.q as u128;
        let mut v = vec![0u32; self.m1()];
        let mut i = i;
        for slot in v.iter_mut() {
            *slot = (i % q) as u32;
            i /= q;
        }
        v
    }
}

fn mid_mul_raw(base: &FieldSpec, modulus: &[u32], a: &[u32], b: &[u32]) -> Vec<u32> {
    let m1 = modulus.len() - 1;
    debug_assert_eq!(a.len(), m1);
    debug_assert_eq!(b.len(), m1);
    if m1 == 1 {
        // reduction by the canonical degree-1 modulus x is plain base arithmetic
        return vec![base.mul(a[0], b[0])];
    }
    let mut prod = vec![0u32; 2 * m1 - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj == 0 {
                continue;
            }
            prod[i + j] = base.add(prod[i + j], base.mul(ai, bj));
        }
    }
    // reduce by the monic modulus
    for i in (m1..prod.len()).rev() {
        let c = prod[i];
        if c == 0 {
            continue;
        }
        prod[i] = 0;
        for (j, &mj) in modulus.iter().take(m1).enumerate() {
            if mj != 0 {
                let t = base.mul(c, mj);
                prod[i - m1 + j] = base.sub(prod[i - m1 + j], t);
            }
        }
    }
    prod.truncate(m1);
    prod
}

fn mid_inv_raw(base: &FieldSpec, modulus: &[u32], a: &[u32]) -> Option<Vec<u32>> {
    let ops = BaseOps(base);
    let m1 = modulus.len() - 1;
    let inv = poly_ext_inv(&ops, a, modulus)?;
    let mut out = inv;
    out.resize(m1, 0);
    Some(out)
}

// Polynomials are little-endian coefficient vectors; helpers keep them trimmed.

pub(crate) fn poly_trim<F: CoefField>(f: &F, v: &mut Vec<F::C>) {
    while let Some(last) = v.last() {
        if f.is_zero(last) {
            v.pop();
        } else {
            break;
        }
    }
}

fn poly_mul<F: CoefField>(f: &F, a: &[F::C], b: &[F::C]) -> Vec<F::C> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![f.zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if f.is_zero(ai) {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if f.is_zero(bj) {
                continue;
            }
            out[i + j] = f.add(&out[i + j], &f.mul(ai, bj));
        }
    }
    poly_trim(f, &mut out);
    out
}

/// Remainder of `a` by monic `m`.
fn poly_rem<F: CoefField>(f: &F, a: &[F::C], m: &[F::C]) -> Vec<F::C> {
    let d = m.len() - 1;
    let mut r: Vec<F::C> = a.to_vec();
    poly_trim(f, &mut r);
    while r.len() > d {
        let lead = r.last().unwrap().clone();
        let shift = r.len() - 1 - d;
        if !f.is_zero(&lead) {
            for (j, mj) in m.iter().take(d).enumerate() {
                if !f.is_zero(mj) {
                    let t = f.mul(&lead, mj);
                    r[shift + j] = f.sub(&r[shift + j], &t);
                }
            }
        }
        r.pop();
        poly_trim(f, &mut r);
    }
    r
}

fn poly_mulmod<F: CoefField>(f: &F, a: &[F::C], b: &[F::C], m: &[F::C]) -> Vec<F::C> {
    poly_rem(f, &poly_mul(f, a, b), m)
}

fn poly_powmod<F: CoefField>(f: &F, a: &[F::C], e: u128, m: &[F::C]) -> Vec<F::C> {
    let mut result = vec![f.one()];
    let mut base = poly_rem(f, a, m);
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            result = poly_mulmod(f, &result, &base, m);
        }
        e >>= 1;
        if e > 0 {
            base = poly_mulmod(f, &base, &base, m);
        }
    }
    result
}

/// g(h) mod m by Horner.
fn poly_compose_mod<F: CoefField>(f: &F, g: &[F::C], h: &[F::C], m: &[F::C]) -> Vec<F::C> {
    let mut acc: Vec<F::C> = Vec::new();
    for gi in g.iter().rev() {
        acc = poly_mulmod(f, &acc, h, m);
        if !f.is_zero(gi) {
            if acc.is_empty() {
                acc.push(gi.clone());
            } else {
                acc[0] = f.add(&acc[0], gi);
            }
        }
        poly_trim(f, &mut acc);
    }
    acc
}

fn poly_gcd<F: CoefField>(f: &F, a: &[F::C], b: &[F::C]) -> Vec<F::C> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    poly_trim(f, &mut x);
    poly_trim(f, &mut y);
    while !y.is_empty() {
        // x mod y, with y made monic first
        let lead_inv = f.inv(y.last().unwrap());
        let y_monic: Vec<F::C> = y.iter().map(|c| f.mul(c, &lead_inv)).collect();
        let r = poly_rem(f, &x, &y_monic);
        x = y_monic;
        y = r;
    }
    x
}

/// Inverse of `a` modulo monic irreducible `m`, or None when a ≡ 0.
fn poly_ext_inv<F: CoefField>(f: &F, a: &[F::C], m: &[F::C]) -> Option<Vec<F::C>> {
    let mut r0: Vec<F::C> = m.to_vec();
    let mut r1 = poly_rem(f, a, m);
    let mut t0: Vec<F::C> = Vec::new();
    let mut t1 = vec![f.one()];
    if r1.is_empty() {
        return None;
    }
    while !r1.is_empty() {
        // divide r0 by r1
        let lead_inv = f.inv(r1.last().unwrap());
        let d1 = r1.len() - 1;
        let mut rem = r0.clone();
        let mut quot = vec![f.zero(); rem.len().saturating_sub(d1)];
        poly_trim(f, &mut rem);
        while rem.len() > d1 {
            let shift = rem.len() - 1 - d1;
            let c = f.mul(rem.last().unwrap(), &lead_inv);
            quot[shift] = f.add(&quot[shift], &c);
            for (j, mj) in r1.iter().enumerate() {
                if !f.is_zero(mj) {
                    let t = f.mul(&c, mj);
                    rem[shift + j] = f.sub(&rem[shift + j], &t);
                }
            }
            poly_trim(f, &mut rem);
        }
        poly_trim(f, &mut quot);
        // (r0, r1) <- (r1, rem); (t0, t1) <- (t1, t0 - quot*t1)
        let qt = poly_mul(f, &quot, &t1);
        let mut t2 = t0.clone();
        if t2.len() < qt.len() {
            t2.resize(qt.len(), f.zero());
        }
        for (i, q) in qt.iter().enumerate() {
            t2[i] = f.sub(&t2[i], q);
        }
        poly_trim(f, &mut t2);
        r0 = r1;
        r1 = rem;
        t0 = t1;
        t1 = t2;
    }
    // r0 is a nonzero constant times gcd; for irreducible m and a ≠ 0 mod m it is a unit
    if r0.len() != 1 {
        return None;
    }
    let scale = f.inv(&r0[0]);
    Some(t0.iter().map(|c| f.mul(c, &scale)).collect())
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin irreducibility: monic `m` of degree d over a field of order Q is
/// irreducible iff x^(Q^d) ≡ x (mod m) and gcd(x^(Q^(d/l)) - x, m) = 1 for
/// every prime l | d. Frobenius powers are built by modular composition so Q^d
/// itself is never materialized.
pub(crate) fn poly_is_irreducible<F: CoefField>(f: &F, m: &[F::C]) -> bool {
    let d = m.len() - 1;
    if d == 0 {
        return false;
    }
    if d == 1 {
        return true;
    }
    let x = vec![f.zero(), f.one()];
    let q = f.order();
    let phi1 = poly_powmod(f, &x, q, m);
    let mut memo: HashMap<usize, Vec<F::C>> = HashMap::new();
    memo.insert(1, phi1);
    fn phi<F: CoefField>(
        f: &F,
        e: usize,
        m: &[F::C],
        memo: &mut HashMap<usize, Vec<F::C>>,
    ) -> Vec<F::C> {
        if let Some(v) = memo.get(&e) {
            return v.clone();
        }
        let half = phi(f, e / 2, m, memo);
        let mut v = poly_compose_mod(f, &half, &half, m);
        if e % 2 == 1 {
            let one = phi(f, 1, m, memo);
            v = poly_compose_mod(f, &v, &one, m);
        }
        memo.insert(e, v.clone());
        v
    }
    let x_trim = {
        let mut t = x.clone();
        poly_trim(f, &mut t);
        t
    };
    let full = phi(f, d, m, &mut memo);
    if full != x_trim {
        return false;
    }
    for l in prime_factors(d as u64) {
        let sub = phi(f, d / l as usize, m, &mut memo);
        // gcd(sub - x, m)
        let mut diff = sub;
        if diff.len() < 2 {
            diff.resize(2, f.zero());
        }
        diff[1] = f.sub(&diff[1], &f.one());
        poly_trim(f, &mut diff);
        let g = poly_gcd(f, &diff, m);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

/// Lexicographically smallest monic irreducible of the given degree
/// (coefficients compared low-degree-first in canonical element order).
pub(crate) fn smallest_irreducible<F: CoefField>(f: &F, degree: usize) -> Vec<F::C> {
    assert!(degree >= 1);
    let q = f.order();
    let mut idx = vec![0u128; degree];
    loop {
        let mut cand: Vec<F::C> = idx.iter().map(|&i| f.from_index(i)).collect();
        cand.push(f.one());
        if poly_is_irreducible(f, &cand) {
            return cand;
        }
        // odometer, low coefficient fastest
        let mut pos = 0;
        loop {
            if pos == degree {
                unreachable!("no irreducible of degree {} found", degree);
            }
            idx[pos] += 1;
            if idx[pos] < q {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// base field
// ---------------------------------------------------------------------------

struct Tables {
    add: Vec<u32>,
    mul: Vec<u32>,
    inv: Vec<u32>,
    neg: Vec<u32>,
}

/// The base field `F_q`, `q = p^s`, with its `F_p` modulus.
pub struct FieldSpec {
    p: u64,
    s: usize,
    q: u64,
    modulus: Vec<u64>,
    tables: Option<Tables>,
}

impl std::fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.p)
            .field("s", &self.s)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.s == other.s && self.modulus == other.modulus
    }
}
impl Eq for FieldSpec {}

impl Clone for FieldSpec {
    fn clone(&self) -> Self {
        // tables are derived data; rebuild rather than copy megabytes
        FieldSpec::from_parts(self.p, self.s, self.modulus.clone())
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldSpec {
    /// Base field with the canonical (lexicographically smallest) modulus.
    pub fn new(p: u64, s: usize) -> Result<FieldSpec, GaloisError> {
        if !is_prime(p) {
            return Err(GaloisError::NonPrime(p));
        }
        if s == 0 {
            return Err(GaloisError::InvalidElement("extension degree s must be >= 1".into()));
        }
        let q = (p as u128).checked_pow(s as u32).filter(|&q| q <= (1 << 31));
        if q.is_none() {
            return Err(GaloisError::FieldTooLarge(format!("q = {p}^{s} exceeds 2^31")));
        }
        let modulus = cached_base_modulus(p, s);
        Ok(FieldSpec::from_parts(p, s, modulus))
    }

    /// Base field with an explicit monic irreducible modulus (for file loading).
    pub fn with_modulus(p: u64, s: usize, modulus: Vec<u64>) -> Result<FieldSpec, GaloisError> {
        if !is_prime(p) {
            return Err(GaloisError::NonPrime(p));
        }
        if modulus.len() != s + 1 || modulus[s] != 1 {
            return Err(GaloisError::InvalidElement(format!(
                "modulus must be monic of degree {s}"
            )));
        }
        if modulus.iter().any(|&c| c >= p) {
            return Err(GaloisError::InvalidElement("modulus coefficient out of range".into()));
        }
        let ops = PrimeOps { p };
        if s > 1 && !poly_is_irreducible(&ops, &modulus) {
            return Err(GaloisError::InvalidElement("modulus is reducible".into()));
        }
        Ok(FieldSpec::from_parts(p, s, modulus))
    }

    fn from_parts(p: u64, s: usize, modulus: Vec<u64>) -> FieldSpec {
        let q = p.pow(s as u32);
        let mut spec = FieldSpec {
            p,
            s,
            q,
            modulus,
            tables: None,
        };
        if q <= TABLE_LIMIT {
            spec.build_tables();
        }
        spec
    }

    fn build_tables(&mut self) {
        let q = self.q as usize;
        let mut add = vec![0u32; q * q];
        let mut mul = vec![0u32; q * q];
        let mut neg = vec![0u32; q];
        for a in 0..q as u32 {
            for b in 0..q as u32 {
                add[a as usize * q + b as usize] = self.add_slow(a, b);
                mul[a as usize * q + b as usize] = self.mul_slow(a, b);
            }
        }
        let mut inv = vec![0u32; q];
        for a in 1..q as u32 {
            neg[a as usize] = self.neg_slow(a);
            for b in 1..q as u32 {
                if mul[a as usize * q + b as usize] == 1 {
                    inv[a as usize] = b;
                    break;
                }
            }
        }
        self.tables = Some(Tables { add, mul, inv, neg });
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn q(&self) -> u64 {
        self.q
    }
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn rank_to_digits(&self, r: u32) -> Vec<u64> {
        let mut v = vec![0u64; self.s];
        let mut r = r as u64;
        for d in v.iter_mut() {
            *d = r % self.p;
            r /= self.p;
        }
        v
    }

    pub fn digits_to_rank(&self, d: &[u64]) -> u32 {
        let mut r = 0u64;
        for &di in d.iter().rev() {
            r = r * self.p + di;
        }
        r as u32
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        if self.s == 1 {
            return ((a as u64 + b as u64) % self.p) as u32;
        }
        let da = self.rank_to_digits(a);
        let db = self.rank_to_digits(b);
        let sum: Vec<u64> = da.iter().zip(&db).map(|(x, y)| (x + y) % self.p).collect();
        self.digits_to_rank(&sum)
    }

    fn neg_slow(&self, a: u32) -> u32 {
        if self.s == 1 {
            return ((self.p - a as u64) % self.p) as u32;
        }
        let da = self.rank_to_digits(a);
        let neg: Vec<u64> = da.iter().map(|x| (self.p - x) % self.p).collect();
        self.digits_to_rank(&neg)
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        if self.s == 1 {
            return (a as u64 * b as u64 % self.p) as u32;
        }
        let ops = PrimeOps { p: self.p };
        let da = self.rank_to_digits(a);
        let db = self.rank_to_digits(b);
        let prod = poly_mulmod(&ops, &da, &db, &self.modulus);
        let mut full = prod;
        full.resize(self.s, 0);
        self.digits_to_rank(&full)
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        match &self.tables {
            Some(t) => t.add[a as usize * self.q as usize + b as usize],
            None => self.add_slow(a, b),
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        match &self.tables {
            Some(t) => t.neg[a as usize],
            None => self.neg_slow(a),
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match &self.tables {
            Some(t) => t.mul[a as usize * self.q as usize + b as usize],
            None => self.mul_slow(a, b),
        }
    }

    pub fn inv(&self, a: u32) -> Result<u32, GaloisError> {
        if a == 0 {
            return Err(GaloisError::DivisionByZero);
        }
        match &self.tables {
            Some(t) => Ok(t.inv[a as usize]),
            None => Ok(self.pow(a, self.q - 2)),
        }
    }

    pub fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut r = 1u32;
        let mut base = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(base, base);
            }
        }
        r
    }

    /// Multiplicative order of a nonzero element.
    pub fn order_of(&self, a: u32) -> u64 {
        debug_assert!(a != 0);
        let mut ord = self.q - 1;
        for f in prime_factors(self.q - 1) {
            while ord % f == 0 && self.pow(a, ord / f) == 1 {
                ord /= f;
            }
        }
        ord
    }

    /// Smallest element in canonical order with multiplicative order q-1.
    pub fn primitive_rank(&self) -> u32 {
        for a in 1..self.q as u32 {
            if self.order_of(a) == self.q - 1 {
                return a;
            }
        }
        unreachable!("every finite field has a primitive element")
    }
}

// ---------------------------------------------------------------------------
// modulus cache
// ---------------------------------------------------------------------------

#[derive(Default)]
struct ModulusCache {
    base: HashMap<(u64, usize), Vec<u64>>,
    mid: HashMap<(u64, usize, usize), Vec<u32>>,
    top: HashMap<(u64, usize, usize, usize), Vec<Vec<u32>>>,
}

fn modulus_cache() -> &'static Mutex<ModulusCache> {
    static CACHE: OnceLock<Mutex<ModulusCache>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(ModulusCache::default()))
}

fn cached_base_modulus(p: u64, s: usize) -> Vec<u64> {
    if let Some(m) = modulus_cache().lock().unwrap().base.get(&(p, s)) {
        return m.clone();
    }
    let ops = PrimeOps { p };
    let m = smallest_irreducible(&ops, s);
    modulus_cache().lock().unwrap().base.insert((p, s), m.clone());
    m
}

fn cached_mid_modulus(base: &FieldSpec, m1: usize) -> Vec<u32> {
    let key = (base.p, base.s, m1);
    if let Some(m) = modulus_cache().lock().unwrap().mid.get(&key) {
        return m.clone();
    }
    let ops = BaseOps(base);
    let m = smallest_irreducible(&ops, m1);
    modulus_cache().lock().unwrap().mid.insert(key, m.clone());
    m
}

fn cached_top_modulus(base: &FieldSpec, mid_modulus: &[u32], u: usize) -> Vec<Vec<u32>> {
    let m1 = mid_modulus.len() - 1;
    let key = (base.p, base.s, m1, u);
    if let Some(m) = modulus_cache().lock().unwrap().top.get(&key) {
        return m.clone();
    }
    let ops = MidOps {
        base,
        modulus: mid_modulus,
    };
    let m = smallest_irreducible(&ops, u);
    modulus_cache().lock().unwrap().top.insert(key, m.clone());
    m
}

// ---------------------------------------------------------------------------
// the tower
// ---------------------------------------------------------------------------

/// The chain `F_q ⊂ F_{q^m1} ⊂ F_{q^m}` with explicit moduli. The top field is
/// built as a degree-`m/m1` extension of the mid field, so the mid-to-top
/// embedding is the constant-polynomial inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTower {
    base: FieldSpec,
    m1: usize,
    m: usize,
    mid_modulus: Vec<u32>,
    top_modulus: Vec<Vec<u32>>,
}

impl FieldTower {
    /// Tower with deterministically chosen (lexicographically smallest) moduli.
    pub fn create(p: u64, s: usize, m1: usize, m: usize) -> Result<FieldTower, GaloisError> {
        if m1 == 0 || m == 0 || m % m1 != 0 {
            return Err(GaloisError::DivisibilityViolation { m1, m });
        }
        let base = FieldSpec::new(p, s)?;
        let mid_modulus = cached_mid_modulus(&base, m1);
        let top_modulus = cached_top_modulus(&base, &mid_modulus, m / m1);
        Ok(FieldTower {
            base,
            m1,
            m,
            mid_modulus,
            top_modulus,
        })
    }

    /// Tower from explicit moduli (for file loading); each modulus is checked
    /// monic and irreducible over its coefficient field.
    pub fn with_moduli(
        base: FieldSpec,
        m1: usize,
        m: usize,
        mid_modulus: Vec<u32>,
        top_modulus: Vec<Vec<u32>>,
    ) -> Result<FieldTower, GaloisError> {
        if m1 == 0 || m == 0 || m % m1 != 0 {
            return Err(GaloisError::DivisibilityViolation { m1, m });
        }
        let u = m / m1;
        if mid_modulus.len() != m1 + 1 || mid_modulus[m1] != 1 {
            return Err(GaloisError::InvalidElement(format!(
                "mid modulus must be monic of degree {m1}"
            )));
        }
        if mid_modulus.iter().any(|&c| c as u64 >= base.q) {
            return Err(GaloisError::InvalidElement("mid modulus coefficient out of range".into()));
        }
        {
            let ops = BaseOps(&base);
            if m1 > 1 && !poly_is_irreducible(&ops, &mid_modulus) {
                return Err(GaloisError::InvalidElement("mid modulus is reducible".into()));
            }
        }
        if top_modulus.len() != u + 1 {
            return Err(GaloisError::InvalidElement(format!(
                "top modulus must have degree {u}"
            )));
        }
        for c in &top_modulus {
            if c.len() != m1 || c.iter().any(|&x| x as u64 >= base.q) {
                return Err(GaloisError::InvalidElement("top modulus coefficient malformed".into()));
            }
        }
        let one = {
            let mut v = vec![0u32; m1];
            v[0] = 1;
            v
        };
        if top_modulus[u] != one {
            return Err(GaloisError::InvalidElement("top modulus must be monic".into()));
        }
        {
            let ops = MidOps {
                base: &base,
                modulus: &mid_modulus,
            };
            if u > 1 && !poly_is_irreducible(&ops, &top_modulus) {
                return Err(GaloisError::InvalidElement("top modulus is reducible".into()));
            }
        }
        Ok(FieldTower {
            base,
            m1,
            m,
            mid_modulus,
            top_modulus,
        })
    }

    pub fn base(&self) -> &FieldSpec {
        &self.base
    }
    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn m(&self) -> usize {
        self.m
    }
    /// Degree of the top field over the mid field.
    pub fn top_over_mid(&self) -> usize {
        self.m / self.m1
    }
    pub fn mid_modulus(&self) -> &[u32] {
        &self.mid_modulus
    }
    pub fn top_modulus(&self) -> &[Vec<u32>] {
        &self.top_modulus
    }

    /// Coefficient-vector width of an element at the given level.
    pub fn width(&self, level: Level) -> usize {
        match level {
            Level::Base => 1,
            Level::Mid => self.m1,
            Level::Top => self.m,
        }
    }

    /// Field size at a level, as u128 (top fields can exceed u64).
    pub fn field_order(&self, level: Level) -> Option<u128> {
        (self.base.q as u128).checked_pow(self.width(level) as u32)
    }

    pub fn zero(&self, level: Level) -> Element {
        Element {
            level,
            c: vec![0; self.width(level)],
        }
    }

    pub fn one(&self, level: Level) -> Element {
        let mut e = self.zero(level);
        e.c[0] = 1;
        e
    }

    pub fn el_base(&self, rank: u32) -> Element {
        assert!((rank as u64) < self.base.q, "base rank out of range");
        Element {
            level: Level::Base,
            c: vec![rank],
        }
    }

    pub fn el_from_ranks(&self, level: Level, ranks: Vec<u32>) -> Result<Element, GaloisError> {
        if ranks.len() != self.width(level) {
            return Err(GaloisError::InvalidElement(format!(
                "expected {} coefficients at {:?}, got {}",
                self.width(level),
                level,
                ranks.len()
            )));
        }
        if ranks.iter().any(|&r| r as u64 >= self.base.q) {
            return Err(GaloisError::InvalidElement("coefficient rank out of range".into()));
        }
        Ok(Element { level, c: ranks })
    }

    /// Embed into a higher (or equal) level; the tower chain makes this the
    /// constant-polynomial inclusion.
    pub fn embed(&self, a: &Element, level: Level) -> Result<Element, GaloisError> {
        if level < a.level {
            return Err(GaloisError::LevelMismatch(format!(
                "cannot embed {:?} down to {:?}",
                a.level, level
            )));
        }
        if level == a.level {
            return Ok(a.clone());
        }
        let mut c = a.c.clone();
        c.resize(self.width(level), 0);
        Ok(Element { level, c })
    }

    fn lift_pair(&self, a: &Element, b: &Element) -> Level {
        a.level.max(b.level)
    }

    pub fn add(&self, a: &Element, b: &Element) -> Element {
        let level = self.lift_pair(a, b);
        let mut out = self.embed(a, level).unwrap();
        for (i, &bc) in b.c.iter().enumerate() {
            out.c[i] = self.base.add(out.c[i], bc);
        }
        out
    }

    pub fn neg(&self, a: &Element) -> Element {
        Element {
            level: a.level,
            c: a.c.iter().map(|&x| self.base.neg(x)).collect(),
        }
    }

    pub fn sub(&self, a: &Element, b: &Element) -> Element {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        // lower-level operand used as a scalar keeps the work proportional to
        // the smaller width
        let (hi, lo) = if a.level >= b.level { (a, b) } else { (b, a) };
        match (hi.level, lo.level) {
            (Level::Base, Level::Base) => Element {
                level: Level::Base,
                c: vec![self.base.mul(hi.c[0], lo.c[0])],
            },
            (_, Level::Base) => {
                let f = lo.c[0];
                Element {
                    level: hi.level,
                    c: hi.c.iter().map(|&x| self.base.mul(x, f)).collect(),
                }
            }
            (Level::Mid, Level::Mid) => Element {
                level: Level::Mid,
                c: mid_mul_raw(&self.base, &self.mid_modulus, &hi.c, &lo.c),
            },
            (Level::Top, Level::Mid) => {
                let m1 = self.m1;
                let mut c = Vec::with_capacity(self.m);
                for chunk in hi.c.chunks(m1) {
                    c.extend(mid_mul_raw(&self.base, &self.mid_modulus, chunk, &lo.c));
                }
                Element { level: Level::Top, c }
            }
            (Level::Top, Level::Top) => Element {
                level: Level::Top,
                c: self.top_mul_raw(&hi.c, &lo.c),
            },
            _ => unreachable!(),
        }
    }

    fn top_mul_raw(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        let m1 = self.m1;
        let u = self.top_over_mid();
        if u == 1 {
            return mid_mul_raw(&self.base, &self.mid_modulus, a, b);
        }
        let zero_chunk = vec![0u32; m1];
        let mut prod: Vec<Vec<u32>> = vec![zero_chunk; 2 * u - 1];
        let a_chunks: Vec<&[u32]> = a.chunks(m1).collect();
        let b_chunks: Vec<&[u32]> = b.chunks(m1).collect();
        for (i, ac) in a_chunks.iter().enumerate() {
            if ac.iter().all(|&x| x == 0) {
                continue;
            }
            for (j, bc) in b_chunks.iter().enumerate() {
                if bc.iter().all(|&x| x == 0) {
                    continue;
                }
                let t = mid_mul_raw(&self.base, &self.mid_modulus, ac, bc);
                for (slot, v) in prod[i + j].iter_mut().zip(&t) {
                    *slot = self.base.add(*slot, *v);
                }
            }
        }
        for i in (u..prod.len()).rev() {
            if prod[i].iter().all(|&x| x == 0) {
                continue;
            }
            let c = std::mem::replace(&mut prod[i], vec![0; m1]);
            for (j, mj) in self.top_modulus.iter().take(u).enumerate() {
                if mj.iter().all(|&x| x == 0) {
                    continue;
                }
                let t = mid_mul_raw(&self.base, &self.mid_modulus, &c, mj);
                for (slot, v) in prod[i - u + j].iter_mut().zip(&t) {
                    *slot = self.base.sub(*slot, *v);
                }
            }
        }
        prod.truncate(u);
        prod.concat()
    }

    pub fn inv(&self, a: &Element) -> Result<Element, GaloisError> {
        if a.is_zero() {
            return Err(GaloisError::DivisionByZero);
        }
        match a.level {
            Level::Base => Ok(self.el_base(self.base.inv(a.c[0])?)),
            Level::Mid => {
                let v = mid_inv_raw(&self.base, &self.mid_modulus, &a.c)
                    .ok_or(GaloisError::DivisionByZero)?;
                Ok(Element {
                    level: Level::Mid,
                    c: v,
                })
            }
            Level::Top => {
                let u = self.top_over_mid();
                if u == 1 {
                    let v = mid_inv_raw(&self.base, &self.mid_modulus, &a.c)
                        .ok_or(GaloisError::DivisionByZero)?;
                    return Ok(Element {
                        level: Level::Top,
                        c: v,
                    });
                }
                let ops = MidOps {
                    base: &self.base,
                    modulus: &self.mid_modulus,
                };
                let chunks: Vec<Vec<u32>> = a.c.chunks(self.m1).map(|c| c.to_vec()).collect();
                let inv = poly_ext_inv(&ops, &chunks, &self.top_modulus)
                    .ok_or(GaloisError::DivisionByZero)?;
                let mut full = inv;
                full.resize(u, vec![0; self.m1]);
                Ok(Element {
                    level: Level::Top,
                    c: full.concat(),
                })
            }
        }
    }

    pub fn pow(&self, a: &Element, mut e: u64) -> Element {
        let mut r = self.one(a.level);
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        r
    }

    /// One application of the Frobenius for the given stride level:
    /// `Base` is x ↦ x^q, `Mid` is x ↦ x^(q^m1), `Top` is x ↦ x^(q^m).
    /// Computed by square-and-multiply (iterated for the larger strides).
    pub fn frobenius(&self, a: &Element, stride: Level) -> Element {
        match stride {
            Level::Base => self.pow(a, self.base.q),
            Level::Mid => {
                let mut r = a.clone();
                for _ in 0..self.m1 {
                    r = self.pow(&r, self.base.q);
                }
                r
            }
            Level::Top => {
                let mut r = a.clone();
                for _ in 0..self.m {
                    r = self.pow(&r, self.base.q);
                }
                r
            }
        }
    }

    /// F_target-linear bijection onto coordinate vectors of length
    /// [level : target]; inverse of `recompose`.
    pub fn decompose(&self, a: &Element, target: Level) -> Result<Vec<Element>, GaloisError> {
        if target >= a.level {
            return Err(GaloisError::LevelMismatch(format!(
                "decompose target {:?} not below element level {:?}",
                target, a.level
            )));
        }
        let w = self.width(target);
        Ok(a.c
            .chunks(w)
            .map(|chunk| Element {
                level: target,
                c: chunk.to_vec(),
            })
            .collect())
    }

    pub fn recompose(&self, level: Level, parts: &[Element]) -> Result<Element, GaloisError> {
        if parts.is_empty() {
            return Err(GaloisError::InvalidElement("recompose of empty vector".into()));
        }
        let sub = parts[0].level;
        if sub >= level || parts.iter().any(|p| p.level != sub) {
            return Err(GaloisError::LevelMismatch(
                "recompose parts must share a level below the target".into(),
            ));
        }
        let expected = self.width(level) / self.width(sub);
        if parts.len() != expected {
            return Err(GaloisError::InvalidElement(format!(
                "recompose expects {expected} parts, got {}",
                parts.len()
            )));
        }
        let mut c = Vec::with_capacity(self.width(level));
        for p in parts {
            c.extend_from_slice(&p.c);
        }
        Ok(Element { level, c })
    }

    /// dst -= f*src, embedding dst upward if the product lives higher.
    pub fn sub_scaled_in_place(&self, dst: &mut Element, f: &Element, src: &Element) {
        let prod = self.mul(f, src);
        let level = dst.level.max(prod.level);
        if dst.level < level {
            *dst = self.embed(dst, level).unwrap();
        }
        for (i, &pc) in prod.c.iter().enumerate() {
            dst.c[i] = self.base.sub(dst.c[i], pc);
        }
    }

    /// Canonical order: integer rank of the coefficient vector, little-endian.
    pub fn canonical_cmp(&self, a: &Element, b: &Element) -> std::cmp::Ordering {
        debug_assert_eq!(a.level, b.level);
        for (x, y) in a.c.iter().rev().zip(b.c.iter().rev()) {
            match x.cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    }

    /// All elements of a level in canonical order. Only sensible for small
    /// fields; the iterator is lazy so callers may take a prefix.
    pub fn elements(&self, level: Level) -> ElementIter<'_> {
        ElementIter {
            tower: self,
            level,
            next: Some(self.zero(level)),
        }
    }

    /// Smallest base element of multiplicative order q-1.
    pub fn primitive_element(&self) -> Element {
        self.el_base(self.base.primitive_rank())
    }

    // -- textual format -----------------------------------------------------

    /// `lvl:d0,d1,...` with the F_p digits of every coefficient flattened in
    /// little-endian order (s digits per base coefficient).
    pub fn render_element(&self, e: &Element) -> String {
        let mut digits = Vec::with_capacity(e.c.len() * self.base.s);
        for &r in &e.c {
            digits.extend(self.base.rank_to_digits(r));
        }
        let body: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
        format!("{}:{}", e.level.tag(), body.join(","))
    }

    pub fn parse_element(&self, s: &str) -> Result<Element, GaloisError> {
        let (tag, body) = s
            .split_once(':')
            .ok_or_else(|| GaloisError::Parse(format!("missing level tag in {s:?}")))?;
        let level = tag
            .chars()
            .next()
            .filter(|_| tag.len() == 1)
            .and_then(Level::from_tag)
            .ok_or_else(|| GaloisError::Parse(format!("bad level tag {tag:?}")))?;
        let digits: Result<Vec<u64>, _> = body.split(',').map(|t| t.trim().parse::<u64>()).collect();
        let digits = digits.map_err(|e| GaloisError::Parse(format!("bad digit in {s:?}: {e}")))?;
        let expected = self.width(level) * self.base.s;
        if digits.len() != expected {
            return Err(GaloisError::Parse(format!(
                "expected {expected} digits for level {tag}, got {}",
                digits.len()
            )));
        }
        if digits.iter().any(|&d| d >= self.base.p) {
            return Err(GaloisError::Parse("digit out of range".into()));
        }
        let ranks: Vec<u32> = digits
            .chunks(self.base.s)
            .map(|chunk| self.base.digits_to_rank(chunk))
            .collect();
        self.el_from_ranks(level, ranks)
    }
}

pub struct ElementIter<'a> {
    tower: &'a FieldTower,
    level: Level,
    next: Option<Element>,
}

impl Iterator for ElementIter<'_> {
    type Item = Element;

    fn next(&mut self) -> Option<Element> {
        let cur = self.next.take()?;
        let q = self.tower.base.q as u32;
        let mut succ = cur.clone();
        let mut pos = 0;
        loop {
            if pos == succ.c.len() {
                self.next = None;
                break;
            }
            succ.c[pos] += 1;
            if succ.c[pos] < q {
                self.next = Some(succ);
                break;
            }
            succ.c[pos] = 0;
            pos += 1;
        }
        let _ = self.level;
        Some(cur)
    }
}

/// Spec-level operation: tower with deterministically chosen moduli.
pub fn tower_create(p: u64, s: usize, m1: usize, m: usize) -> Result<FieldTower, GaloisError> {
    FieldTower::create(p, s, m1, m)
}

/// Spec-level operation: smallest primitive element of the base field.
pub fn primitive_element(spec: &FieldSpec) -> u32 {
    spec.primitive_rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trial-division irreducibility oracle over F_p: a degree-d polynomial is
    /// reducible iff it has a monic factor of degree 1..=d/2. Independent of
    /// the Rabin test used by the library.
    fn oracle_irreducible_fp(p: u64, poly: &[u64]) -> bool {
        let ops = PrimeOps { p };
        let d = poly.len() - 1;
        for fd in 1..=d / 2 {
            let mut idx = vec![0u64; fd];
            loop {
                let mut cand: Vec<u64> = idx.clone();
                cand.push(1);
                if poly_rem(&ops, poly, &cand).is_empty() {
                    return false;
                }
                let mut pos = 0;
                loop {
                    if pos == fd {
                        break;
                    }
                    idx[pos] += 1;
                    if idx[pos] < p {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == fd {
                    break;
                }
            }
        }
        true
    }

    #[test]
    fn trivial_tower_gf2() {
        let t = tower_create(2, 1, 1, 1).unwrap();
        assert_eq!(t.base().q(), 2);
        assert_eq!(t.width(Level::Top), 1);
        let one = t.one(Level::Base);
        assert!(t.add(&one, &one).is_zero());
    }

    #[test]
    fn tower_5_1_5_5_modulus_is_lex_smallest_irreducible() {
        let t = tower_create(5, 1, 5, 5).unwrap();
        let found = t.mid_modulus().to_vec();
        // oracle: found modulus is irreducible and everything lex-smaller is not
        let as_u64: Vec<u64> = found.iter().map(|&c| c as u64).collect();
        assert!(oracle_irreducible_fp(5, &as_u64));
        let rank = |m: &[u32]| -> u64 {
            m.iter().take(5).rev().fold(0u64, |acc, &c| acc * 5 + c as u64)
        };
        let found_rank = rank(&found);
        for r in 0..found_rank {
            let mut digits = vec![0u64; 5];
            let mut v = r;
            for d in digits.iter_mut() {
                *d = v % 5;
                v /= 5;
            }
            digits.push(1);
            assert!(
                !oracle_irreducible_fp(5, &digits),
                "candidate below chosen modulus is irreducible: {digits:?}"
            );
        }
    }

    #[test]
    fn tower_2_2_2_4_moduli() {
        let t = tower_create(2, 2, 2, 4).unwrap();
        // base F4 modulus: x^2 + x + 1 over F2
        assert_eq!(t.base().modulus(), &[1, 1, 1]);
        // mid modulus over F4 found by the sieve; verify irreducibility by
        // exhaustive root check (degree 2 is reducible iff it has a root)
        let m = t.mid_modulus();
        assert_eq!(m.len(), 3);
        assert_eq!(m[2], 1);
        for r in 0..4u32 {
            let x = t.el_base(r);
            let val = t.add(
                &t.add(&t.mul(&x, &x), &t.mul(&t.el_base(m[1]), &x)),
                &t.el_base(m[0]),
            );
            assert!(!val.is_zero(), "mid modulus has root {r}");
        }
        // lex-minimality: all smaller (c0, c1) give a degree-2 poly with a root
        let found = (m[0] as u64) + 4 * (m[1] as u64);
        for cand in 0..found {
            let c0 = (cand % 4) as u32;
            let c1 = (cand / 4) as u32;
            let has_root = (0..4u32).any(|r| {
                let x = t.el_base(r);
                t.add(&t.add(&t.mul(&x, &x), &t.mul(&t.el_base(c1), &x)), &t.el_base(c0))
                    .is_zero()
            });
            assert!(has_root, "smaller candidate ({c0},{c1}) is irreducible");
        }
    }

    #[test]
    fn tower_create_rejects_bad_input() {
        assert_eq!(tower_create(4, 1, 1, 1).unwrap_err(), GaloisError::NonPrime(4));
        assert_eq!(
            tower_create(5, 1, 2, 5).unwrap_err(),
            GaloisError::DivisibilityViolation { m1: 2, m: 5 }
        );
    }

    #[test]
    fn gf4_multiplication_table_example() {
        // GF(4) with modulus x^2+x+1: x * x = x + 1
        let t = tower_create(2, 2, 2, 4).unwrap();
        let x = t.el_base(2); // digits (0,1)
        let xx = t.mul(&x, &x);
        assert_eq!(xx, t.el_base(3)); // digits (1,1) = x + 1

        // full 4x4 table against polynomial-reduction oracle over F2
        for a in 0..4u32 {
            for b in 0..4u32 {
                let got = t.mul(&t.el_base(a), &t.el_base(b)).coeffs()[0];
                // oracle: multiply digit polynomials mod x^2+x+1 by hand
                let (a0, a1) = (a & 1, a >> 1);
                let (b0, b1) = (b & 1, b >> 1);
                let c0 = a0 * b0;
                let c1 = (a0 * b1 + a1 * b0) & 1;
                let c2 = a1 * b1;
                // x^2 = x + 1
                let r0 = (c0 + c2) & 1;
                let r1 = (c1 + c2) & 1;
                assert_eq!(got, r0 + 2 * r1, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn frobenius_fixes_mid_after_m1_applications() {
        let t = tower_create(2, 2, 2, 4).unwrap();
        for e in t.elements(Level::Mid) {
            let mut f = e.clone();
            for _ in 0..t.m1() {
                f = t.frobenius(&f, Level::Base);
            }
            assert_eq!(f, e);
        }
    }

    #[test]
    fn division_by_zero_and_level_mismatch() {
        let t = tower_create(5, 1, 2, 4).unwrap();
        assert_eq!(t.inv(&t.zero(Level::Mid)).unwrap_err(), GaloisError::DivisionByZero);
        let b = t.el_base(3);
        assert!(matches!(
            t.decompose(&b, Level::Base).unwrap_err(),
            GaloisError::LevelMismatch(_)
        ));
        assert!(matches!(
            t.embed(&t.one(Level::Top), Level::Mid).unwrap_err(),
            GaloisError::LevelMismatch(_)
        ));
    }

    #[test]
    fn decompose_examples() {
        let t = tower_create(2, 2, 2, 4).unwrap();
        let zero_top = t.zero(Level::Top);
        let parts = t.decompose(&zero_top, Level::Base).unwrap();
        assert!(parts.iter().all(|p| p.is_zero()));
        assert_eq!(parts.len(), 4);

        let one_mid = t.one(Level::Mid);
        let parts = t.decompose(&one_mid, Level::Base).unwrap();
        assert_eq!(parts[0], t.el_base(1));
        assert!(parts[1].is_zero());

        // x in GF(4) over GF(2): base element of rank 2 has digits (0,1)
        let x = t.el_base(2);
        assert_eq!(t.base().rank_to_digits(x.coeffs()[0]), vec![0, 1]);
    }

    #[test]
    fn decompose_recompose_roundtrip_exhaustive_small() {
        let t = tower_create(2, 1, 2, 4).unwrap();
        for e in t.elements(Level::Top) {
            let mids = t.decompose(&e, Level::Mid).unwrap();
            assert_eq!(t.recompose(Level::Top, &mids).unwrap(), e);
            let bases = t.decompose(&e, Level::Base).unwrap();
            assert_eq!(t.recompose(Level::Top, &bases).unwrap(), e);
        }
    }

    #[test]
    fn primitive_elements() {
        assert_eq!(FieldSpec::new(2, 1).unwrap().primitive_rank(), 1);
        assert_eq!(FieldSpec::new(5, 1).unwrap().primitive_rank(), 2);
        // GF(4): x (rank 2) has order 3
        assert_eq!(FieldSpec::new(2, 2).unwrap().primitive_rank(), 2);
        // oracle for GF(5): orders of 2,3,4 checked exhaustively
        let f5 = FieldSpec::new(5, 1).unwrap();
        let order = |a: u32| (1..5).find(|&e| f5.pow(a, e) == 1).unwrap();
        assert_eq!(order(2), 4);
        assert_eq!(order(3), 4);
        assert_eq!(order(4), 2);
    }

    #[test]
    fn primitive_powers_never_hit_one_early() {
        for (p, s) in [(2u64, 1usize), (5, 1), (2, 2), (3, 2), (7, 1)] {
            let f = FieldSpec::new(p, s).unwrap();
            let g = f.primitive_rank();
            for e in 1..f.q() - 1 {
                assert_ne!(f.pow(g, e), 1, "q={} early cycle at {e}", f.q());
            }
            assert_eq!(f.pow(g, f.q() - 1), 1);
        }
    }

    #[test]
    fn textual_format_roundtrip() {
        let t = tower_create(5, 1, 5, 5).unwrap();
        let e = t
            .el_from_ranks(Level::Mid, vec![2, 0, 4, 1, 3])
            .unwrap();
        assert_eq!(t.render_element(&e), "m:2,0,4,1,3");
        assert_eq!(t.parse_element("m:2,0,4,1,3").unwrap(), e);

        // base field with s > 1 renders flattened F_p digits
        let t4 = tower_create(2, 2, 3, 6).unwrap();
        let x = t4.el_base(2);
        assert_eq!(t4.render_element(&x), "b:0,1");
        let top = t4.one(Level::Top);
        let s = t4.render_element(&top);
        assert_eq!(t4.parse_element(&s).unwrap(), top);
        assert!(t4.parse_element("m:9,0,0,0,0,0").is_err());
        assert!(t4.parse_element("x:0").is_err());
    }

    #[test]
    fn inverse_across_levels() {
        let t = tower_create(3, 1, 2, 6).unwrap();
        for level in [Level::Base, Level::Mid, Level::Top] {
            for e in t.elements(level).skip(1).take(40) {
                let inv = t.inv(&e).unwrap();
                let prod = t.mul(&e, &inv);
                assert_eq!(prod, t.one(level), "level {level:?}");
            }
        }
    }

    #[test]
    fn with_moduli_validates() {
        let t = tower_create(2, 1, 3, 6).unwrap();
        let rebuilt = FieldTower::with_moduli(
            t.base().clone(),
            t.m1(),
            t.m(),
            t.mid_modulus().to_vec(),
            t.top_modulus().to_vec(),
        )
        .unwrap();
        assert_eq!(rebuilt, t);
        // reducible mid modulus rejected: x^3 + 1 = (x+1)(x^2+x+1) over F2
        assert!(FieldTower::with_moduli(
            t.base().clone(),
            3,
            6,
            vec![1, 0, 0, 1],
            t.top_modulus().to_vec(),
        )
        .is_err());
    }
}
