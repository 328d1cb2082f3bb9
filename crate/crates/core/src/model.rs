//! Code parameters, derived dimensions, group index structure, erasure-pattern
//! enumeration and the closed-form distance values and bounds.
//!
//! Coordinate layout (1-based): groups A_i are contiguous, local blocks
//! B_(i,s) tile the front of each group, data positions precede the local
//! parities inside a block. For HDL codes each group ends with its h2 mid
//! parities and the final h1 coordinates of the code are the global parities;
//! for HL codes the blocks tile the groups exactly and there is no tail.

use crate::combi::{binomial, for_each_combination, next_combination};
use crate::matrix::IndexSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("divisibility violation: {0}")]
    DivisibilityViolation(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Hl,
    Hdl,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Hl => "hl",
            Family::Hdl => "hdl",
        }
    }
}

/// Validated code parameters with the derived sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    family: Family,
    k: usize,
    r1: usize,
    r2: usize,
    h1: usize,
    h2: usize,
    delta: usize,
    t1: usize,
    t2: usize,
    n1: usize,
    n2: usize,
    n: usize,
}

impl CodeParams {
    pub fn new(
        family: Family,
        k: usize,
        r1: usize,
        r2: usize,
        h1: usize,
        h2: usize,
        delta: usize,
    ) -> Result<CodeParams, ModelError> {
        if k == 0 || r1 == 0 || r2 == 0 {
            return Err(ModelError::InvalidParams("k, r1, r2 must be >= 1".into()));
        }
        let (t1, t2) = match family {
            Family::Hl => {
                if (k + h1) % r1 != 0 {
                    return Err(ModelError::DivisibilityViolation(format!(
                        "r1 = {r1} must divide k + h1 = {}",
                        k + h1
                    )));
                }
                if (r1 + h2) % r2 != 0 {
                    return Err(ModelError::DivisibilityViolation(format!(
                        "r2 = {r2} must divide r1 + h2 = {}",
                        r1 + h2
                    )));
                }
                ((k + h1) / r1, (r1 + h2) / r2)
            }
            Family::Hdl => {
                if k % r1 != 0 {
                    return Err(ModelError::DivisibilityViolation(format!(
                        "r1 = {r1} must divide k = {k}"
                    )));
                }
                if r1 % r2 != 0 {
                    return Err(ModelError::DivisibilityViolation(format!(
                        "r2 = {r2} must divide r1 = {r1}"
                    )));
                }
                (k / r1, r1 / r2)
            }
        };
        let n2 = r2 + delta;
        let n1 = r1 + h2 + t2 * delta;
        let n = k + h1 + t1 * (h2 + t2 * delta);
        Ok(CodeParams {
            family,
            k,
            r1,
            r2,
            h1,
            h2,
            delta,
            t1,
            t2,
            n1,
            n2,
            n,
        })
    }

    pub fn hl(
        k: usize,
        r1: usize,
        r2: usize,
        h1: usize,
        h2: usize,
        delta: usize,
    ) -> Result<CodeParams, ModelError> {
        CodeParams::new(Family::Hl, k, r1, r2, h1, h2, delta)
    }

    pub fn hdl(
        k: usize,
        r1: usize,
        r2: usize,
        h1: usize,
        h2: usize,
        delta: usize,
    ) -> Result<CodeParams, ModelError> {
        CodeParams::new(Family::Hdl, k, r1, r2, h1, h2, delta)
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn r1(&self) -> usize {
        self.r1
    }
    pub fn r2(&self) -> usize {
        self.r2
    }
    pub fn h1(&self) -> usize {
        self.h1
    }
    pub fn h2(&self) -> usize {
        self.h2
    }
    pub fn delta(&self) -> usize {
        self.delta
    }
    pub fn t1(&self) -> usize {
        self.t1
    }
    pub fn t2(&self) -> usize {
        self.t2
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity-check rows, n - k.
    pub fn parity_rows(&self) -> usize {
        self.n - self.k
    }

    /// First coordinate (1-based) of group i (0-based index).
    pub fn group_start(&self, i: usize) -> usize {
        i * self.n1 + 1
    }

    /// Contiguous group/block layout as index sets.
    pub fn groups(&self) -> GroupStructure {
        let mut a = Vec::with_capacity(self.t1);
        let mut b = Vec::with_capacity(self.t1);
        for i in 0..self.t1 {
            let start = self.group_start(i);
            a.push(IndexSet::new((start..start + self.n1).collect()).unwrap());
            let mut blocks = Vec::with_capacity(self.t2);
            for s in 0..self.t2 {
                let bs = start + s * self.n2;
                blocks.push(IndexSet::new((bs..bs + self.n2).collect()).unwrap());
            }
            b.push(blocks);
        }
        let global_tail = match self.family {
            Family::Hl => IndexSet::empty(),
            Family::Hdl => IndexSet::new((self.n - self.h1 + 1..=self.n).collect()).unwrap(),
        };
        GroupStructure { a, b, global_tail }
    }
}

/// Spec operation `derive_dims`: the derived sizes plus the group layout.
pub fn derive_dims(params: &CodeParams) -> (usize, usize, usize, usize, usize, GroupStructure) {
    (
        params.t1,
        params.t2,
        params.n1,
        params.n2,
        params.n,
        params.groups(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    /// Mid groups A_i, each of size n1.
    pub a: Vec<IndexSet>,
    /// Local blocks B_(i,s), each of size n2.
    pub b: Vec<Vec<IndexSet>>,
    /// The h1 coordinates outside all groups (HDL only; empty for HL).
    pub global_tail: IndexSet,
}

// ---------------------------------------------------------------------------
// admissible sets E
// ---------------------------------------------------------------------------

/// Group-local choices of r1 coordinates with at most r2 per block, in
/// lexicographic order. Identical for every group.
fn group_local_choices(params: &CodeParams) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if params.r1 > params.n1 {
        return out;
    }
    for_each_combination(params.n1, params.r1, |idx| {
        let mut per_block = vec![0usize; params.t2];
        let mut ok = true;
        for &i in idx {
            let block = i / params.n2;
            if block < params.t2 {
                per_block[block] += 1;
                if per_block[block] > params.r2 {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push(idx.iter().map(|&i| i + 1).collect());
        }
        true
    });
    out
}

/// Lazy, restartable stream of the admissible sets E: |E| = k + h1,
/// |E ∩ A_i| = r1 for every group, |E ∩ B_(i,s)| <= r2 for every block.
/// For HDL codes the whole global tail completes E.
pub struct AdmissibleE {
    params: CodeParams,
    tail: IndexSet,
    per_group: Vec<Vec<usize>>,
    idx: Vec<usize>,
    done: bool,
}

impl AdmissibleE {
    fn assemble(&self) -> IndexSet {
        let mut coords = Vec::with_capacity(self.params.k + self.params.h1);
        for (g, &choice) in self.idx.iter().enumerate() {
            let start = self.params.group_start(g);
            coords.extend(self.per_group[choice].iter().map(|&loc| start + loc - 1));
        }
        coords.extend(self.tail.iter());
        IndexSet::new(coords).expect("admissible coordinates are distinct")
    }
}

impl Iterator for AdmissibleE {
    type Item = IndexSet;

    fn next(&mut self) -> Option<IndexSet> {
        if self.done || self.per_group.is_empty() {
            return None;
        }
        let e = self.assemble();
        // odometer with the last group fastest keeps the stream lexicographic
        let radix = self.per_group.len();
        let mut pos = self.idx.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.idx[pos] += 1;
            if self.idx[pos] < radix {
                break;
            }
            self.idx[pos] = 0;
        }
        Some(e)
    }
}

pub fn enumerate_admissible_e(params: &CodeParams) -> AdmissibleE {
    enumerate_admissible_e_from(params, 0)
}

/// Restart the admissible-E stream at position `start` (mixed-radix
/// unranking over the per-group choice lists).
pub fn enumerate_admissible_e_from(params: &CodeParams, start: u128) -> AdmissibleE {
    let per_group = group_local_choices(params);
    let radix = per_group.len() as u128;
    let total = if radix == 0 {
        0
    } else {
        radix.saturating_pow(params.t1 as u32)
    };
    let mut idx = vec![0usize; params.t1];
    let mut done = false;
    if start >= total {
        done = true;
    } else {
        let mut rem = start;
        for pos in (0..params.t1).rev() {
            idx[pos] = (rem % radix) as usize;
            rem /= radix;
        }
    }
    AdmissibleE {
        params: *params,
        tail: params.groups().global_tail,
        per_group,
        idx,
        done,
    }
}

pub fn admissible_e_count(params: &CodeParams) -> u128 {
    let per = group_local_choices(params).len() as u128;
    per.saturating_pow(params.t1 as u32)
}

// ---------------------------------------------------------------------------
// erasure patterns
// ---------------------------------------------------------------------------

/// A (δ, h2) erasure pattern: δ erased coordinates per local block (local
/// indices 1..=n2), h2 additional per group (group-local indices 1..=n1,
/// disjoint from the block erasures), plus optional extra global erasures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasurePattern {
    pub delta: Vec<Vec<Vec<usize>>>,
    pub gamma: Vec<Vec<usize>>,
    pub extra: IndexSet,
}

impl ErasurePattern {
    pub fn validate(&self, params: &CodeParams) -> Result<(), ModelError> {
        if self.delta.len() != params.t1 || self.gamma.len() != params.t1 {
            return Err(ModelError::InvalidPattern(format!(
                "pattern must have {} groups",
                params.t1
            )));
        }
        for (i, group) in self.delta.iter().enumerate() {
            if group.len() != params.t2 {
                return Err(ModelError::InvalidPattern(format!(
                    "group {} must have {} blocks",
                    i + 1,
                    params.t2
                )));
            }
            for (s, block) in group.iter().enumerate() {
                if block.len() != params.delta {
                    return Err(ModelError::InvalidPattern(format!(
                        "block ({},{}) must erase exactly {} coordinates",
                        i + 1,
                        s + 1,
                        params.delta
                    )));
                }
                let mut sorted = block.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != block.len()
                    || sorted.first().map(|&x| x == 0).unwrap_or(false)
                    || sorted.last().map(|&x| x > params.n2).unwrap_or(false)
                {
                    return Err(ModelError::InvalidPattern(format!(
                        "block ({},{}) erasures out of range or repeated",
                        i + 1,
                        s + 1
                    )));
                }
            }
        }
        for (i, g) in self.gamma.iter().enumerate() {
            if g.len() != params.h2 {
                return Err(ModelError::InvalidPattern(format!(
                    "group {} must have {} mid erasures",
                    i + 1,
                    params.h2
                )));
            }
            let delta_local: Vec<usize> = self.delta[i]
                .iter()
                .enumerate()
                .flat_map(|(s, block)| block.iter().map(move |&j| s * params.n2 + j))
                .collect();
            for &loc in g {
                if loc == 0 || loc > params.n1 {
                    return Err(ModelError::InvalidPattern(format!(
                        "group {} mid erasure {loc} out of range",
                        i + 1
                    )));
                }
                if delta_local.contains(&loc) {
                    return Err(ModelError::InvalidPattern(format!(
                        "group {} mid erasure {loc} collides with a local erasure",
                        i + 1
                    )));
                }
            }
            let mut sorted = g.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != g.len() {
                return Err(ModelError::InvalidPattern(format!(
                    "group {} repeats a mid erasure",
                    i + 1
                )));
            }
        }
        if self.extra.len() > params.h1 {
            return Err(ModelError::InvalidPattern(format!(
                "at most {} extra erasures allowed",
                params.h1
            )));
        }
        let fp = self.footprint(params);
        for x in self.extra.iter() {
            if x == 0 || x > params.n() {
                return Err(ModelError::InvalidPattern(format!(
                    "extra erasure {x} out of range"
                )));
            }
            if fp.contains(x) {
                return Err(ModelError::InvalidPattern(format!(
                    "extra erasure {x} collides with the pattern"
                )));
            }
        }
        Ok(())
    }

    /// Global coordinates erased by the Δ and Γ parts (extras excluded).
    pub fn footprint(&self, params: &CodeParams) -> IndexSet {
        let mut coords = Vec::new();
        for (i, group) in self.delta.iter().enumerate() {
            let start = params.group_start(i);
            for (s, block) in group.iter().enumerate() {
                coords.extend(block.iter().map(|&j| start + s * params.n2 + j - 1));
            }
        }
        for (i, g) in self.gamma.iter().enumerate() {
            let start = params.group_start(i);
            coords.extend(g.iter().map(|&loc| start + loc - 1));
        }
        IndexSet::new(coords).expect("pattern coordinates are distinct")
    }

    /// Everything erased, extras included.
    pub fn erased_set(&self, params: &CodeParams) -> IndexSet {
        self.footprint(params).union(&self.extra)
    }

    /// `D[i][s]=..;G[i]=..;X=..` with 1-based indices, all slots explicit.
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        for (i, group) in self.delta.iter().enumerate() {
            for (s, block) in group.iter().enumerate() {
                let vals: Vec<String> = block.iter().map(|j| j.to_string()).collect();
                parts.push(format!("D[{}][{}]={}", i + 1, s + 1, vals.join(",")));
            }
        }
        for (i, g) in self.gamma.iter().enumerate() {
            let vals: Vec<String> = g.iter().map(|j| j.to_string()).collect();
            parts.push(format!("G[{}]={}", i + 1, vals.join(",")));
        }
        parts.push(format!("X={}", self.extra.render()));
        parts.join(";")
    }

    pub fn parse(params: &CodeParams, text: &str) -> Result<ErasurePattern, ModelError> {
        let mut delta = vec![vec![Vec::new(); params.t2]; params.t1];
        let mut gamma = vec![Vec::new(); params.t1];
        let mut extra = IndexSet::empty();
        for tok in text.split(';') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| ModelError::Parse(format!("bad pattern token {tok:?}")))?;
            let vals: Result<Vec<usize>, _> = val
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| v.trim().parse::<usize>())
                .collect();
            let vals = vals.map_err(|e| ModelError::Parse(format!("bad index list {val:?}: {e}")))?;
            if let Some(rest) = key.strip_prefix("D[") {
                let (i, rest) = rest
                    .split_once("][")
                    .ok_or_else(|| ModelError::Parse(format!("bad D key {key:?}")))?;
                let s = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ModelError::Parse(format!("bad D key {key:?}")))?;
                let i: usize = i
                    .parse()
                    .map_err(|_| ModelError::Parse(format!("bad D key {key:?}")))?;
                let s: usize = s
                    .parse()
                    .map_err(|_| ModelError::Parse(format!("bad D key {key:?}")))?;
                if i == 0 || i > params.t1 || s == 0 || s > params.t2 {
                    return Err(ModelError::Parse(format!("D index ({i},{s}) out of range")));
                }
                delta[i - 1][s - 1] = vals;
            } else if let Some(rest) = key.strip_prefix("G[") {
                let i = rest
                    .strip_suffix(']')
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| ModelError::Parse(format!("bad G key {key:?}")))?;
                if i == 0 || i > params.t1 {
                    return Err(ModelError::Parse(format!("G index {i} out of range")));
                }
                gamma[i - 1] = vals;
            } else if key == "X" {
                extra = IndexSet::new(vals).map_err(|e| ModelError::Parse(e.to_string()))?;
            } else {
                return Err(ModelError::Parse(format!("unknown pattern key {key:?}")));
            }
        }
        let pattern = ErasurePattern { delta, gamma, extra };
        pattern.validate(params)?;
        Ok(pattern)
    }
}

/// One lexicographic combination slot of the pattern odometer.
struct Slot {
    candidates: Vec<usize>,
    pick: usize,
    idx: Vec<usize>,
}

impl Slot {
    fn new(candidates: Vec<usize>, pick: usize) -> Option<Slot> {
        if candidates.len() < pick {
            return None;
        }
        Some(Slot {
            candidates,
            pick,
            idx: (0..pick).collect(),
        })
    }

    fn current(&self) -> Vec<usize> {
        self.idx.iter().map(|&i| self.candidates[i]).collect()
    }

    fn advance(&mut self) -> bool {
        next_combination(&mut self.idx, self.candidates.len(), self.pick)
    }

    fn reset(&mut self) {
        self.idx = (0..self.pick).collect();
    }
}

enum SlotKind {
    Delta(usize, usize),
    Gamma(usize),
    Extra,
}

/// Lazy stream of all (δ, h2) erasure patterns, optionally extended with all
/// size-h1 extra erasure sets. Lexicographic in the slot order
/// Δ(1,1), .., Δ(t1,t2), Γ(1), .., Γ(t1), X.
pub struct PatternIter {
    params: CodeParams,
    with_extra: bool,
    slots: Vec<Slot>,
    done: bool,
}

impl PatternIter {
    fn slot_kind(&self, pos: usize) -> SlotKind {
        let d = self.params.t1 * self.params.t2;
        if pos < d {
            SlotKind::Delta(pos / self.params.t2, pos % self.params.t2)
        } else if pos < d + self.params.t1 {
            SlotKind::Gamma(pos - d)
        } else {
            SlotKind::Extra
        }
    }

    /// Candidate coordinates for a slot given all earlier slots' picks.
    fn candidates(&self, pos: usize) -> Vec<usize> {
        match self.slot_kind(pos) {
            SlotKind::Delta(_, _) => (1..=self.params.n2).collect(),
            SlotKind::Gamma(i) => {
                let mut taken = vec![false; self.params.n1 + 1];
                for s in 0..self.params.t2 {
                    let slot = &self.slots[i * self.params.t2 + s];
                    for j in slot.current() {
                        taken[s * self.params.n2 + j] = true;
                    }
                }
                (1..=self.params.n1).filter(|&loc| !taken[loc]).collect()
            }
            SlotKind::Extra => {
                let pattern = self.assemble_core();
                let fp = pattern.footprint(&self.params);
                (1..=self.params.n()).filter(|&c| !fp.contains(c)).collect()
            }
        }
    }

    fn assemble_core(&self) -> ErasurePattern {
        let mut delta = vec![vec![Vec::new(); self.params.t2]; self.params.t1];
        let mut gamma = vec![Vec::new(); self.params.t1];
        for (pos, slot) in self.slots.iter().enumerate() {
            match self.slot_kind(pos) {
                SlotKind::Delta(i, s) => delta[i][s] = slot.current(),
                SlotKind::Gamma(i) => gamma[i] = slot.current(),
                SlotKind::Extra => {}
            }
        }
        ErasurePattern {
            delta,
            gamma,
            extra: IndexSet::empty(),
        }
    }

    fn assemble(&self) -> ErasurePattern {
        let mut p = self.assemble_core();
        if self.with_extra {
            let extra_slot = self.slots.last().unwrap();
            p.extra = IndexSet::new(extra_slot.current()).unwrap();
        }
        p
    }

    /// Rebuild slots from `pos` onward with first combinations; returns false
    /// when some slot cannot be filled.
    fn refill_from(&mut self, pos: usize) -> bool {
        let total = self.slots.len();
        for p in pos..total {
            let cand = self.candidates(p);
            let pick = self.slots[p].pick;
            match Slot::new(cand, pick) {
                Some(s) => self.slots[p] = s,
                None => return false,
            }
        }
        true
    }
}

impl Iterator for PatternIter {
    type Item = ErasurePattern;

    fn next(&mut self) -> Option<ErasurePattern> {
        if self.done {
            return None;
        }
        let out = self.assemble();
        // advance from the last slot; refill dependents after a carry
        let mut pos = self.slots.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            if self.slots[pos].advance() {
                if self.refill_from(pos + 1) {
                    break;
                }
                // a dependent slot became unfillable; keep advancing this one
                pos += 1;
                continue;
            }
            self.slots[pos].reset();
        }
        Some(out)
    }
}

pub fn enumerate_patterns(params: &CodeParams, with_extra: bool) -> PatternIter {
    let n_slots = params.t1 * params.t2 + params.t1 + usize::from(with_extra);
    let mut it = PatternIter {
        params: *params,
        with_extra,
        slots: Vec::with_capacity(n_slots),
        done: false,
    };
    // seed with empty slots then refill in order so dependencies resolve
    for pos in 0..n_slots {
        let pick = match it.slot_kind(pos) {
            SlotKind::Delta(_, _) => params.delta,
            SlotKind::Gamma(_) => params.h2,
            SlotKind::Extra => params.h1,
        };
        it.slots.push(Slot {
            candidates: Vec::new(),
            pick,
            idx: Vec::new(),
        });
    }
    if !it.refill_from(0) {
        it.done = true;
    }
    it
}

/// Number of bare (δ, h2) patterns, by direct counting.
pub fn pattern_count(params: &CodeParams) -> u128 {
    let per_block = binomial(params.n2, params.delta);
    let gamma_choices = binomial(params.n1 - params.t2 * params.delta, params.h2);
    let per_group = per_block
        .saturating_pow(params.t2 as u32)
        .saturating_mul(gamma_choices);
    per_group.saturating_pow(params.t1 as u32)
}

// ---------------------------------------------------------------------------
// distance formulas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceFormula {
    /// Single-level locality bound instantiated at the local level (r2, δ+1).
    RdBound,
    /// Exact distance of a [r1, r2, h2, δ] local MRC (the middle codes).
    LocalMrc,
    /// Two-level hierarchical bound with δ2 - 1 = δ and δ1 = h2 + δ + 1.
    HierBound,
    /// Exact distance of an HDL-MRC.
    HdlMrc,
    /// Exact distance of a [r1, r2, h2, δ] data-local MRC.
    DataLocalMrc,
}

/// Closed-form distance value or bound for the given parameters.
pub fn distance_formula(params: &CodeParams, which: DistanceFormula) -> i64 {
    let k = params.k as i64;
    let n = params.n as i64;
    let h1 = params.h1 as i64;
    let h2 = params.h2 as i64;
    let delta = params.delta as i64;
    match which {
        DistanceFormula::RdBound => {
            n - k + 1 - (params.k.div_ceil(params.r2) as i64 - 1) * delta
        }
        DistanceFormula::LocalMrc => h2 + delta + 1 + (params.h2 / params.r2) as i64 * delta,
        DistanceFormula::HierBound => {
            n - k + 1
                - (params.k.div_ceil(params.r2) as i64 - 1) * delta
                - (params.k.div_ceil(params.r1) as i64 - 1) * h2
        }
        DistanceFormula::HdlMrc => h1 + h2 + delta + 1,
        DistanceFormula::DataLocalMrc => h2 + delta + 1,
    }
}

// ---------------------------------------------------------------------------
// config files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigExtras {
    pub q: Option<u64>,
    pub seed: Option<u64>,
}

/// `key=value` lines with `#` comments; keys k, r1, r2, h1, h2, delta,
/// family, optional q and seed.
pub fn parse_config(text: &str) -> Result<(CodeParams, ConfigExtras), ModelError> {
    let mut family = None;
    let mut extras = ConfigExtras::default();
    let mut ints: [(&str, Option<usize>); 6] = [
        ("k", None),
        ("r1", None),
        ("r2", None),
        ("h1", None),
        ("h2", None),
        ("delta", None),
    ];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ModelError::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "family" => {
                family = Some(match value {
                    "hl" => Family::Hl,
                    "hdl" => Family::Hdl,
                    _ => {
                        return Err(ModelError::Parse(format!(
                            "line {}: family must be hl or hdl",
                            lineno + 1
                        )))
                    }
                });
            }
            "q" | "seed" => {
                let v: u64 = value
                    .parse()
                    .map_err(|e| ModelError::Parse(format!("line {}: {e}", lineno + 1)))?;
                if key == "q" {
                    extras.q = Some(v);
                } else {
                    extras.seed = Some(v);
                }
            }
            _ => {
                let slot = ints.iter_mut().find(|(k, _)| *k == key);
                match slot {
                    Some((_, v)) => {
                        *v = Some(value.parse().map_err(|e| {
                            ModelError::Parse(format!("line {}: {e}", lineno + 1))
                        })?);
                    }
                    None => {
                        return Err(ModelError::Parse(format!(
                            "line {}: unknown key {key:?}",
                            lineno + 1
                        )))
                    }
                }
            }
        }
    }
    let family = family.ok_or_else(|| ModelError::Parse("missing family".into()))?;
    let get = |name: &str| {
        ints.iter()
            .find(|(k, _)| *k == name)
            .and_then(|(_, v)| *v)
            .ok_or_else(|| ModelError::Parse(format!("missing key {name}")))
    };
    let params = CodeParams::new(
        family,
        get("k")?,
        get("r1")?,
        get("r2")?,
        get("h1")?,
        get("h2")?,
        get("delta")?,
    )?;
    Ok((params, extras))
}

pub fn render_config(params: &CodeParams, extras: &ConfigExtras) -> String {
    let mut out = String::new();
    out.push_str(&format!("family={}\n", params.family.as_str()));
    out.push_str(&format!("k={}\n", params.k));
    out.push_str(&format!("r1={}\n", params.r1));
    out.push_str(&format!("r2={}\n", params.r2));
    out.push_str(&format!("h1={}\n", params.h1));
    out.push_str(&format!("h2={}\n", params.h2));
    out.push_str(&format!("delta={}\n", params.delta));
    if let Some(q) = extras.q {
        out.push_str(&format!("q={q}\n"));
    }
    if let Some(seed) = extras.seed {
        out.push_str(&format!("seed={seed}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> CodeParams {
        CodeParams::hl(5, 3, 2, 1, 1, 2).unwrap()
    }

    #[test]
    fn derive_dims_examples() {
        let p = example1();
        assert_eq!((p.t1(), p.t2(), p.n1(), p.n2(), p.n()), (2, 2, 8, 4, 16));
        let hdl = CodeParams::hdl(4, 2, 2, 1, 1, 2).unwrap();
        assert_eq!(
            (hdl.t1(), hdl.t2(), hdl.n1(), hdl.n2(), hdl.n()),
            (2, 1, 5, 4, 11)
        );
        let degenerate = CodeParams::hl(6, 3, 3, 0, 0, 0).unwrap();
        assert_eq!(degenerate.n(), 6);

        assert!(matches!(
            CodeParams::hl(5, 3, 2, 2, 1, 2).unwrap_err(),
            ModelError::DivisibilityViolation(_)
        ));
        assert!(matches!(
            CodeParams::hdl(5, 3, 2, 1, 1, 2).unwrap_err(),
            ModelError::DivisibilityViolation(_)
        ));
    }

    #[test]
    fn group_layout() {
        let p = example1();
        let g = p.groups();
        assert_eq!(g.a.len(), 2);
        assert_eq!(g.a[0], IndexSet::new((1..=8).collect()).unwrap());
        assert_eq!(g.b[1][0], IndexSet::new((9..=12).collect()).unwrap());
        assert!(g.global_tail.is_empty());
        let total: usize = g.a.iter().map(|a| a.len()).sum();
        assert_eq!(total, p.n());

        let hdl = CodeParams::hdl(4, 2, 2, 1, 1, 2).unwrap();
        let g = hdl.groups();
        assert_eq!(g.global_tail, IndexSet::new(vec![11]).unwrap());
        let total: usize = g.a.iter().map(|a| a.len()).sum();
        assert_eq!(total, hdl.n() - hdl.h1());
        assert_eq!(g.b[0][0], IndexSet::new(vec![1, 2, 3, 4]).unwrap());
        assert_eq!(g.a[0], IndexSet::new((1..=5).collect()).unwrap());
    }

    #[test]
    fn admissible_e_count_example1_and_oracle() {
        let p = example1();
        assert_eq!(admissible_e_count(&p), 2304);
        let from_stream = enumerate_admissible_e(&p).count();
        assert_eq!(from_stream, 2304);

        // independent oracle: filter all 6-subsets of [16]
        let g = p.groups();
        let mut oracle = 0usize;
        for_each_combination(16, 6, |idx| {
            let set: Vec<usize> = idx.iter().map(|&i| i + 1).collect();
            let ok = g.a.iter().enumerate().all(|(i, a)| {
                let in_a = set.iter().filter(|&&c| a.contains(c)).count();
                in_a == p.r1()
                    && g.b[i]
                        .iter()
                        .all(|b| set.iter().filter(|&&c| b.contains(c)).count() <= p.r2())
            });
            if ok {
                oracle += 1;
            }
            true
        });
        assert_eq!(oracle, 2304);

        // stream is strictly increasing lexicographically, hence duplicate-free
        let all: Vec<IndexSet> = enumerate_admissible_e(&p).collect();
        for w in all.windows(2) {
            assert!(w[0] < w[1]);
        }

        // restartable prefix
        let tail: Vec<IndexSet> = enumerate_admissible_e_from(&p, 2300).collect();
        assert_eq!(tail.len(), 4);
        assert_eq!(tail[0], all[2300]);
    }

    #[test]
    fn admissible_e_degenerate_cases() {
        // delta = 0 makes the per-block constraint vacuous
        let p = CodeParams::hl(4, 2, 2, 0, 0, 0).unwrap();
        assert_eq!(admissible_e_count(&p), 1);
        // single group covering everything
        let p = CodeParams::hl(3, 4, 2, 1, 2, 1).unwrap();
        assert_eq!(p.t1(), 1);
        let all: Vec<IndexSet> = enumerate_admissible_e(&p).collect();
        assert!(!all.is_empty());
        for e in &all {
            assert_eq!(e.len(), p.k() + p.h1());
        }
        // HDL streams always contain the global tail
        let hdl = CodeParams::hdl(4, 2, 2, 1, 1, 2).unwrap();
        for e in enumerate_admissible_e(&hdl) {
            assert!(e.contains(11));
        }
    }

    #[test]
    fn pattern_count_example1() {
        let p = example1();
        // (C(4,2)^2 * C(4,1))^2 = (6*6*4)^2
        assert_eq!(pattern_count(&p), 20736);
        let counted = enumerate_patterns(&p, false).count();
        assert_eq!(counted, 20736);
    }

    #[test]
    fn pattern_degenerate() {
        let p = CodeParams::hl(4, 2, 2, 0, 0, 0).unwrap();
        let pats: Vec<ErasurePattern> = enumerate_patterns(&p, false).collect();
        assert_eq!(pats.len(), 1);
        assert!(pats[0].footprint(&p).is_empty());
    }

    #[test]
    fn complement_duality_example1() {
        let p = example1();
        let mut footprints: Vec<IndexSet> = enumerate_patterns(&p, false)
            .map(|pat| pat.footprint(&p))
            .collect();
        footprints.sort();
        footprints.dedup();
        let mut complements: Vec<IndexSet> = enumerate_admissible_e(&p)
            .map(|e| e.complement(p.n()))
            .collect();
        complements.sort();
        assert_eq!(footprints, complements);
    }

    #[test]
    fn distance_formula_values() {
        let p = example1();
        assert_eq!(distance_formula(&p, DistanceFormula::HdlMrc), 5);
        assert_eq!(distance_formula(&p, DistanceFormula::LocalMrc), 4);
        assert_eq!(distance_formula(&p, DistanceFormula::HierBound), 7);
        assert_eq!(distance_formula(&p, DistanceFormula::DataLocalMrc), 4);
        // 16 - 5 + 1 - (ceil(5/2) - 1)*2 = 8
        assert_eq!(distance_formula(&p, DistanceFormula::RdBound), 8);
    }

    #[test]
    fn config_roundtrip() {
        let p = example1();
        let extras = ConfigExtras {
            q: Some(5),
            seed: None,
        };
        let text = render_config(&p, &extras);
        let (back, back_extras) = parse_config(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back_extras, extras);
        assert!(parse_config("k=1\n").is_err());
        assert!(parse_config("family=hl\nk=1\nr1=1\nr2=1\nh1=0\nh2=0\ndelta=0\nbogus=3\n").is_err());
    }

    #[test]
    fn pattern_roundtrip() {
        let p = example1();
        let pat = enumerate_patterns(&p, true).nth(17).unwrap();
        let text = pat.render();
        let back = ErasurePattern::parse(&p, &text).unwrap();
        assert_eq!(back, pat);
        assert_eq!(back.render(), text);
    }

    #[test]
    fn pattern_validation_rejects_collisions() {
        let p = example1();
        let mut pat = enumerate_patterns(&p, false).next().unwrap();
        // force the gamma erasure onto a delta-erased coordinate
        let loc = pat.delta[0][0][0];
        pat.gamma[0] = vec![loc];
        assert!(pat.validate(&p).is_err());
    }
}
