//! Tiered propagation of purified models: auxiliary system-sized matrices
//! indexed by mode occupations.
//!
//! Storage is ADO-major: entry `(i, j)` of ADO `k` sits at `k * d^2 + i * d + j`.

use crate::error::{Error, Result};
use crate::linalg::{identity, CMat};
use crate::modelgen::{Chirality, Factor, ModelSpec, SuperTerm};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

type C = Complex64;

/// Occupations of the right-chirality modes (`m`) and left-chirality modes (`n`),
/// each in model order within its chirality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AdoKey {
    pub m: Vec<u16>,
    pub n: Vec<u16>,
}

impl AdoKey {
    pub fn tier(&self) -> usize {
        self.m.iter().chain(&self.n).map(|&x| x as usize).sum()
    }
}

/// Tier caps: `total` on all occupations, optionally separate caps per chirality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TierCap {
    pub total: usize,
    pub right: Option<usize>,
    pub left: Option<usize>,
}

impl TierCap {
    pub fn total(l: usize) -> Self {
        Self { total: l, right: None, left: None }
    }
}

/// Sparse key: sorted `(mode, occupation)` pairs over model mode ids.
type SparseKey = Vec<(u32, u16)>;

#[derive(Debug, Clone)]
pub struct AdoIndex {
    pub cap: TierCap,
    chirality: Vec<Chirality>,
    keys: Vec<SparseKey>,
    tiers: Vec<usize>,
    lookup: HashMap<SparseKey, usize>,
    /// `(mode, index of key + e_mode, sqrt(occupation + 1))` for keys below the cap.
    raise: Vec<Vec<(u32, u32, f64)>>,
    /// `(mode, index of key - e_mode, sqrt(occupation))`.
    lower: Vec<Vec<(u32, u32, f64)>>,
}

/// Largest ADO count accepted.
pub const MAX_ADOS: usize = 20_000_000;

impl AdoIndex {
    pub fn new(chirality: &[Chirality], cap: TierCap) -> Result<Self> {
        let n_modes = chirality.len();
        let side_ok = |key: &SparseKey, extra: Chirality| {
            let mut r = 0usize;
            let mut l = 0usize;
            for &(mode, occ) in key {
                match chirality[mode as usize] {
                    Chirality::Right => r += occ as usize,
                    Chirality::Left => l += occ as usize,
                }
            }
            match extra {
                Chirality::Right => r += 1,
                Chirality::Left => l += 1,
            }
            cap.right.is_none_or(|c| r <= c) && cap.left.is_none_or(|c| l <= c)
        };
        let mut keys: Vec<SparseKey> = vec![Vec::new()];
        let mut tiers = vec![0usize];
        let mut frontier: Vec<SparseKey> = vec![Vec::new()];
        for tier in 1..=cap.total {
            let mut next = Vec::new();
            for key in &frontier {
                let start = key.last().map_or(0, |&(m, _)| m as usize);
                for mode in start..n_modes {
                    if !side_ok(key, chirality[mode]) {
                        continue;
                    }
                    let mut k = key.clone();
                    match k.last_mut() {
                        Some(last) if last.0 as usize == mode => last.1 += 1,
                        _ => k.push((mode as u32, 1)),
                    }
                    next.push(k);
                }
            }
            if keys.len() + next.len() > MAX_ADOS {
                return Err(Error::Assembly(format!("more than {MAX_ADOS} ADOs at tier {tier}")));
            }
            tiers.extend(std::iter::repeat_n(tier, next.len()));
            keys.extend(next.iter().cloned());
            frontier = next;
        }
        let lookup: HashMap<SparseKey, usize> = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let mut raise = vec![Vec::new(); keys.len()];
        let mut lower = vec![Vec::new(); keys.len()];
        for (idx, key) in keys.iter().enumerate() {
            for &(mode, occ) in key {
                let mut k = key.clone();
                let pos = k.iter().position(|&(m, _)| m == mode).unwrap();
                if occ == 1 {
                    k.remove(pos);
                } else {
                    k[pos].1 -= 1;
                }
                let down = lookup[&k];
                lower[idx].push((mode, down as u32, (occ as f64).sqrt()));
                raise[down].push((mode, idx as u32, (occ as f64).sqrt()));
            }
        }
        for r in raise.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        Ok(Self { cap, chirality: chirality.to_vec(), keys, tiers, lookup, raise, lower })
    }

    pub fn for_model(model: &ModelSpec, cap: TierCap) -> Result<Self> {
        let ch: Vec<Chirality> = model.modes.iter().map(|m| m.chirality).collect();
        Self::new(&ch, cap)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn tier(&self, idx: usize) -> usize {
        self.tiers[idx]
    }

    /// Occupation of every model mode for ADO `idx`.
    pub fn occupations(&self, idx: usize) -> Vec<u16> {
        let mut occ = vec![0u16; self.chirality.len()];
        for &(m, o) in &self.keys[idx] {
            occ[m as usize] = o;
        }
        occ
    }

    pub fn index_of(&self, occupations: &[u16]) -> Option<usize> {
        let key: SparseKey = occupations
            .iter()
            .enumerate()
            .filter(|(_, &o)| o > 0)
            .map(|(m, &o)| (m as u32, o))
            .collect();
        self.lookup.get(&key).copied()
    }

    pub fn key(&self, idx: usize) -> AdoKey {
        let occ = self.occupations(idx);
        let mut key = AdoKey { m: Vec::new(), n: Vec::new() };
        for (mode, &o) in occ.iter().enumerate() {
            match self.chirality[mode] {
                Chirality::Right => key.m.push(o),
                Chirality::Left => key.n.push(o),
            }
        }
        key
    }

    fn sparse_occ(&self, idx: usize, mode: u32) -> u16 {
        self.keys[idx].iter().find(|&&(m, _)| m == mode).map_or(0, |&(_, o)| o)
    }
}

/// All keys with `sum m + sum n <= l` for `p` right and `q` left modes, graded then lexicographic.
pub fn enumerate_ados(p: usize, q: usize, l: usize) -> Result<Vec<AdoKey>> {
    let mut ch = vec![Chirality::Right; p];
    ch.extend(std::iter::repeat_n(Chirality::Left, q));
    let index = AdoIndex::new(&ch, TierCap::total(l))?;
    Ok((0..index.len()).map(|i| index.key(i)).collect())
}

/// Sparse `d^2 x d^2` superoperator on one ADO: `(out, in, value)`.
#[derive(Debug, Clone, Default)]
struct SysSuper {
    entries: Vec<(u32, u32, C)>,
}

impl SysSuper {
    fn add(&mut self, coeff: C, a: &CMat, b: &CMat) {
        let d = a.nrows();
        for i in 0..d {
            for k in 0..d {
                let aik = a[(i, k)];
                if aik == C::new(0.0, 0.0) {
                    continue;
                }
                for l in 0..d {
                    for j in 0..d {
                        let blj = b[(l, j)];
                        if blj != C::new(0.0, 0.0) {
                            self.entries.push(((i * d + j) as u32, (k * d + l) as u32, coeff * aik * blj));
                        }
                    }
                }
            }
        }
    }

    fn finish(&mut self) {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(u32, u32, C)> = Vec::with_capacity(self.entries.len());
        for &(o, i, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == o && last.1 == i => last.2 += v,
                _ => merged.push((o, i, v)),
            }
        }
        merged.retain(|e| e.2 != C::new(0.0, 0.0));
        self.entries = merged;
    }

    #[inline]
    fn apply_add(&self, scale: C, input: &[C], out: &mut [C]) {
        for &(o, i, v) in &self.entries {
            out[o as usize] += scale * v * input[i as usize];
        }
    }

    fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compiled action of a list of superoperator terms on a tiered state.
#[derive(Debug, Clone)]
pub struct HeomOperator {
    pub index: Arc<AdoIndex>,
    pub d: usize,
    sys: SysSuper,
    /// Per-mode scalar of number-like terms; ADO `k` gets `sum_a n_a * freq[a]`.
    freq: Vec<C>,
    diag: Vec<C>,
    /// Terms lowering the mode's stored occupation (reading the raised ADO).
    lowering: Vec<SysSuper>,
    /// Terms raising the mode's stored occupation (reading the lowered ADO).
    raising: Vec<SysSuper>,
}

fn sys_factor_product(model: &ModelSpec, factors: &[Factor]) -> Result<CMat> {
    let mut m = identity(model.dim());
    for f in factors {
        if let Factor::Sys(label) = f {
            let op = model
                .system
                .operator(label)
                .ok_or_else(|| Error::Assembly(format!("unknown system operator '{label}'")))?;
            m *= op;
        }
    }
    Ok(m)
}

/// Net single-ladder step of a term: `None` for system-only terms,
/// `Some((mode, +1 | -1 | 0))`, where 0 marks a number-like `d^dag d` term.
fn classify(model: &ModelSpec, term: &SuperTerm) -> Result<Option<(usize, i8)>> {
    let mut steps = Vec::new();
    for f in term.left.iter().rev() {
        if let Factor::Mode { mode, op } = f {
            steps.push((*mode, Chirality::Right, matches!(op, crate::modelgen::Ladder::Raise)));
        }
    }
    for f in term.right.iter() {
        if let Factor::Mode { mode, op } = f {
            steps.push((*mode, Chirality::Left, matches!(op, crate::modelgen::Ladder::Lower)));
        }
    }
    for &(mode, side, _) in &steps {
        let m = model
            .modes
            .get(mode)
            .ok_or_else(|| Error::Assembly(format!("term references mode {mode} absent from the model")))?;
        if m.chirality != side {
            return Err(Error::Assembly(format!("mode {mode} ({:?}) used on the wrong side", m.chirality)));
        }
    }
    match steps.as_slice() {
        [] => Ok(None),
        [(mode, _, up)] => Ok(Some((*mode, if *up { 1 } else { -1 }))),
        // Lowering then raising the same mode: multiplies by its occupation.
        [(m1, _, false), (m2, _, true)] if m1 == m2 => Ok(Some((*m1, 0))),
        _ => Err(Error::UnsupportedTerm(format!("{} ladder factors in one term", steps.len()))),
    }
}

impl HeomOperator {
    /// Compiles `scale * sum coeff * L rho R` for the tiered representation.
    pub fn from_terms(model: &ModelSpec, index: Arc<AdoIndex>, terms: &[SuperTerm], scale: C) -> Result<Self> {
        let d = model.dim();
        let n_modes = model.modes.len();
        if index.chirality.len() != n_modes {
            return Err(Error::Assembly(format!("index has {} modes, model has {n_modes}", index.chirality.len())));
        }
        let mut sys = SysSuper::default();
        let mut freq = vec![C::new(0.0, 0.0); n_modes];
        let mut lowering = vec![SysSuper::default(); n_modes];
        let mut raising = vec![SysSuper::default(); n_modes];
        let id = identity(d);
        for term in terms {
            let a = sys_factor_product(model, &term.left)?;
            let b = sys_factor_product(model, &term.right)?;
            let c = scale * term.coeff;
            match classify(model, term)? {
                None => sys.add(c, &a, &b),
                Some((mode, 0)) => {
                    if a != id || b != id {
                        return Err(Error::UnsupportedTerm("number term with system factors".into()));
                    }
                    freq[mode] += c;
                }
                Some((mode, 1)) => raising[mode].add(c, &a, &b),
                Some((mode, _)) => lowering[mode].add(c, &a, &b),
            }
        }
        sys.finish();
        for g in lowering.iter_mut().chain(raising.iter_mut()) {
            g.finish();
        }
        let diag = (0..index.len())
            .map(|k| index.keys[k].iter().map(|&(m, o)| freq[m as usize] * o as f64).sum())
            .collect();
        Ok(Self { index, d, sys, freq, diag, lowering, raising })
    }

    /// `-i * generator` of the model.
    pub fn generator(model: &ModelSpec, index: Arc<AdoIndex>) -> Result<Self> {
        Self::from_terms(model, index, &model.generator, C::new(0.0, -1.0))
    }

    pub fn state_len(&self) -> usize {
        self.index.len() * self.d * self.d
    }

    fn apply_one(&self, k: usize, y: &[C], out: &mut [C]) {
        let dd = self.d * self.d;
        let zero = C::new(0.0, 0.0);
        out.iter_mut().for_each(|o| *o = zero);
        let own = &y[k * dd..(k + 1) * dd];
        let dk = self.diag[k];
        if dk != zero {
            for (o, x) in out.iter_mut().zip(own) {
                *o += dk * x;
            }
        }
        self.sys.apply_add(C::new(1.0, 0.0), own, out);
        for &(mode, up, amp) in &self.index.raise[k] {
            let g = &self.lowering[mode as usize];
            if !g.is_empty() {
                let u = up as usize;
                g.apply_add(C::new(amp, 0.0), &y[u * dd..(u + 1) * dd], out);
            }
        }
        for &(mode, down, amp) in &self.index.lower[k] {
            let g = &self.raising[mode as usize];
            if !g.is_empty() {
                let dn = down as usize;
                g.apply_add(C::new(amp, 0.0), &y[dn * dd..(dn + 1) * dd], out);
            }
        }
    }

    /// `out = Op y` on flat ADO-major storage.
    pub fn apply(&self, y: &[C], out: &mut [C]) {
        let dd = self.d * self.d;
        debug_assert_eq!(y.len(), self.state_len());
        if self.index.len() >= 64 {
            out.par_chunks_mut(dd).enumerate().for_each(|(k, o)| self.apply_one(k, y, o));
        } else {
            out.chunks_mut(dd).enumerate().for_each(|(k, o)| self.apply_one(k, y, o));
        }
    }

    pub fn apply_state(&self, state: &HeomState) -> Result<HeomState> {
        if state.data.len() != self.state_len() {
            return Err(Error::Dimension { expected: self.state_len(), got: state.data.len() });
        }
        let mut out = vec![C::new(0.0, 0.0); state.data.len()];
        self.apply(&state.data, &mut out);
        Ok(HeomState { index: self.index.clone(), d: self.d, data: out })
    }

    /// Diagonal frequency scalar of each mode (`-i z` for generator operators).
    pub fn mode_frequencies(&self) -> &[C] {
        &self.freq
    }
}

#[derive(Debug, Clone)]
pub struct HeomState {
    pub index: Arc<AdoIndex>,
    pub d: usize,
    pub data: Vec<C>,
}

impl HeomState {
    pub fn zeros(index: Arc<AdoIndex>, d: usize) -> Self {
        let n = index.len() * d * d;
        Self { index, d, data: vec![C::new(0.0, 0.0); n] }
    }

    pub fn from_rho(index: Arc<AdoIndex>, rho: &CMat) -> Self {
        let d = rho.nrows();
        let mut s = Self::zeros(index, d);
        for i in 0..d {
            for j in 0..d {
                s.data[i * d + j] = rho[(i, j)];
            }
        }
        s
    }

    pub fn ado(&self, k: usize) -> CMat {
        let dd = self.d * self.d;
        CMat::from_row_slice(self.d, self.d, &self.data[k * dd..(k + 1) * dd])
    }

    /// The tier-0 matrix.
    pub fn rho_s(&self) -> CMat {
        self.ado(0)
    }
}

/// `-i * generator` applied to `state`.
pub fn heom_rhs(model: &ModelSpec, state: &HeomState) -> Result<HeomState> {
    HeomOperator::generator(model, state.index.clone())?.apply_state(state)
}

pub fn heom_apply_insertion(model: &ModelSpec, state: &HeomState, insertion: &crate::modelgen::FieldInsertion) -> Result<HeomState> {
    HeomOperator::from_terms(model, state.index.clone(), &insertion.terms, C::new(1.0, 0.0))?.apply_state(state)
}

/// Initial tiered state from the model's Wick expansion, normalized to unit tier-0 trace.
pub fn heom_initial_state(model: &ModelSpec, index: Arc<AdoIndex>) -> Result<(HeomState, C)> {
    let base = HeomState::from_rho(index.clone(), &model.initial.rho_s);
    if model.initial.inputs.is_empty() {
        return Ok((base, C::new(1.0, 0.0)));
    }
    let mut ops = HashMap::new();
    for &i in &model.initial.inputs {
        ops.insert(i, HeomOperator::from_terms(model, index.clone(), &model.insertions[i].terms, C::new(1.0, 0.0))?);
    }
    let mut total = HeomState::zeros(index, model.dim());
    for term in model.sorted_expansion() {
        let mut s = base.clone();
        for i in &term.insertions {
            s = ops[i].apply_state(&s)?;
        }
        for (t, x) in total.data.iter_mut().zip(&s.data) {
            *t += term.scalar * x;
        }
    }
    let norm = total.rho_s().trace();
    if norm.norm() < 1e-300 {
        return Err(Error::Domain("input state has zero trace".into()));
    }
    total.data.iter_mut().for_each(|x| *x /= norm);
    Ok((total, norm))
}

/// Maps each mode to its conjugate partner (same source term, opposite chirality,
/// `z_left = -conj(z_right)`), when every mode has one.
pub fn conjugate_partners(model: &ModelSpec) -> Option<Vec<usize>> {
    let mut partner = vec![usize::MAX; model.modes.len()];
    for a in &model.modes {
        if partner[a.id] != usize::MAX {
            continue;
        }
        let b = model.modes.iter().find(|b| {
            b.chirality != a.chirality
                && partner[b.id] == usize::MAX
                && b.role == a.role
                && b.term_index == a.term_index
                && (b.z + a.z.conj()).norm() <= 1e-12 * a.z.norm().max(1.0)
                && (b.lambda1 - a.lambda1.conj()).norm() <= 1e-12 * a.lambda1.norm().max(1.0)
        })?;
        partner[a.id] = b.id;
        partner[b.id] = a.id;
    }
    Some(partner)
}

/// `max_k || rho_k - (rho_{swap(k)})^dag ||` under the partner map.
pub fn conjugation_defect(state: &HeomState, partners: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..state.index.len() {
        let occ = state.index.occupations(k);
        let mut swapped = vec![0u16; occ.len()];
        for (mode, &o) in occ.iter().enumerate() {
            swapped[partners[mode]] = o;
        }
        if let Some(j) = state.index.index_of(&swapped) {
            let diff = state.ado(k) - state.ado(j).adjoint();
            worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierReport {
    pub levels: Vec<usize>,
    /// Max deviation between consecutive levels (one fewer than `levels`).
    pub deviations: Vec<f64>,
    pub converged: bool,
}

/// Runs `observe(L)` for each level and compares consecutive results.
pub fn tier_convergence<F>(levels: &[usize], tol: f64, observe: F) -> Result<TierReport>
where
    F: Fn(usize) -> Result<Vec<f64>>,
{
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("tier levels must increase".into()));
    }
    let runs: Vec<Vec<f64>> = levels.iter().map(|&l| observe(l)).collect::<Result<_>>()?;
    let deviations: Vec<f64> = runs
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let converged = deviations.last().is_none_or(|&d| d <= tol);
    if !converged {
        log::warn!("tier hierarchy not converged: last deviation {:.3e}", deviations.last().unwrap());
    }
    Ok(TierReport { levels: levels.to_vec(), deviations, converged })
}

/// Occupation of `mode` in ADO `idx`.
pub fn ado_occupation(index: &AdoIndex, idx: usize, mode: usize) -> u16 {
    index.sparse_occ(idx, mode as u32)
}

#[cfg(test)]
mod tests;
