//! Superoperator assembly on vectorized state spaces.
//!
//! Purified layout: state index `sys * n_occ + occ` with `sys = i * d_S + j`
//! (ket row `i`, bra column `j`) and `occ` enumerating mode occupations in
//! lexicographic order, optionally capped in total occupation. Every mode
//! appears once. Doubled layout: row-major vectorization of the full density
//! matrix on `system (x) modes`, used by the oracle assemblies.

mod doubled;

pub use doubled::{
    assemble_case1_lindblad, assemble_conventional_pm, assemble_finite_a, expectation_doubled, full_density,
    lindblad_superop, superop_from_terms, Case1Layout,
};

use crate::error::{Error, Result};
use crate::linalg::{identity, CMat};
use crate::modelgen::{Chirality, Factor, Ladder, ModelSpec, SuperTerm};
use crate::sparse::{SparseSuperOp, Triplets};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;

/// Hard ceiling on the number of occupation states of a purified layout.
pub const MAX_OCCUPATIONS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LayoutKind {
    Purified { cap: Option<usize>, occupations: Vec<Vec<u16>> },
    Doubled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLayout {
    pub d_s: usize,
    pub n_max: Vec<usize>,
    pub kind: LayoutKind,
}

impl SpaceLayout {
    pub fn purified(d_s: usize, n_max: &[usize], cap: Option<usize>) -> Result<Self> {
        let occupations = enumerate_occupations(n_max, cap)?;
        Ok(Self { d_s, n_max: n_max.to_vec(), kind: LayoutKind::Purified { cap, occupations } })
    }

    pub fn doubled(d_s: usize, n_max: &[usize]) -> Self {
        Self { d_s, n_max: n_max.to_vec(), kind: LayoutKind::Doubled }
    }

    /// Hilbert dimension of the mode factors (one copy).
    pub fn mode_dim(&self) -> usize {
        self.n_max.iter().map(|n| n + 1).product()
    }

    pub fn n_occ(&self) -> usize {
        match &self.kind {
            LayoutKind::Purified { occupations, .. } => occupations.len(),
            LayoutKind::Doubled => self.mode_dim() * self.mode_dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d_s * self.d_s * self.n_occ()
    }

    pub fn occupations(&self) -> Option<&[Vec<u16>]> {
        match &self.kind {
            LayoutKind::Purified { occupations, .. } => Some(occupations),
            LayoutKind::Doubled => None,
        }
    }

    /// `rho_S (x) |vacuum>` in this layout.
    pub fn embed_vacuum(&self, rho_s: &CMat) -> Result<Vec<Complex64>> {
        check_square(rho_s, self.d_s)?;
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim()];
        match &self.kind {
            LayoutKind::Purified { .. } => {
                let n_occ = self.n_occ();
                for i in 0..self.d_s {
                    for j in 0..self.d_s {
                        v[(i * self.d_s + j) * n_occ] = rho_s[(i, j)];
                    }
                }
            }
            LayoutKind::Doubled => {
                let n = self.d_s * self.mode_dim();
                let m = self.mode_dim();
                for i in 0..self.d_s {
                    for j in 0..self.d_s {
                        v[(i * m) * n + j * m] = rho_s[(i, j)];
                    }
                }
            }
        }
        Ok(v)
    }
}

fn check_square(m: &CMat, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Dimension { expected: d, got: m.nrows() });
    }
    Ok(())
}

/// All occupation vectors with `n_k <= n_max[k]` and, if given, `sum <= cap`,
/// in lexicographic order (the all-zero vector first).
pub fn enumerate_occupations(n_max: &[usize], cap: Option<usize>) -> Result<Vec<Vec<u16>>> {
    let total: f64 = n_max.iter().map(|&n| (n + 1) as f64).product();
    if cap.is_none() && total > MAX_OCCUPATIONS as f64 {
        return Err(Error::Assembly(format!("{total:.3e} occupation states exceed the layout limit")));
    }
    let mut out = Vec::new();
    let mut cur = vec![0u16; n_max.len()];
    fn rec(k: usize, budget: usize, n_max: &[usize], cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) -> Result<()> {
        if k == n_max.len() {
            if out.len() >= MAX_OCCUPATIONS {
                return Err(Error::Assembly("occupation states exceed the layout limit".into()));
            }
            out.push(cur.clone());
            return Ok(());
        }
        for n in 0..=n_max[k].min(budget) {
            cur[k] = n as u16;
            rec(k + 1, budget - n, n_max, cur, out)?;
        }
        cur[k] = 0;
        Ok(())
    }
    rec(0, cap.unwrap_or(usize::MAX), n_max, &mut cur, &mut out)?;
    Ok(out)
}

/// Mode part of a term: ladder steps in application order, each
/// `(mode, +1 to raise or -1 to lower the stored occupation)`.
#[derive(Debug, Clone)]
struct CompiledTerm {
    coeff: Complex64,
    sys: Vec<(usize, usize, Complex64)>,
    steps: Vec<(usize, i8)>,
}

fn sys_product(model: &ModelSpec, factors: &[&Factor]) -> Result<CMat> {
    let d = model.dim();
    let mut m = identity(d);
    for f in factors {
        if let Factor::Sys(label) = f {
            let op = model
                .system
                .operator(label)
                .ok_or_else(|| Error::Assembly(format!("unknown system operator '{label}'")))?;
            check_square(op, d)?;
            m *= op;
        }
    }
    Ok(m)
}

fn compile_term(model: &ModelSpec, term: &SuperTerm) -> Result<CompiledTerm> {
    let left: Vec<&Factor> = term.left.iter().collect();
    let right: Vec<&Factor> = term.right.iter().collect();
    let a = sys_product(model, &left)?;
    let b = sys_product(model, &right)?;
    let d = model.dim();
    let mut sys = Vec::new();
    // A rho B  ->  (A (x) B^T) vec(rho), entries A[i,k] B[l,j].
    for i in 0..d {
        for k in 0..d {
            let aik = a[(i, k)];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                for l in 0..d {
                    let blj = b[(l, j)];
                    if blj != Complex64::new(0.0, 0.0) {
                        sys.push((i * d + j, k * d + l, aik * blj));
                    }
                }
            }
        }
    }
    let mut steps = Vec::new();
    let check = |mode: usize, want: Chirality| -> Result<()> {
        let m = model
            .modes
            .get(mode)
            .ok_or_else(|| Error::Assembly(format!("term references mode {mode} absent from the model")))?;
        if m.chirality != want {
            return Err(Error::Assembly(format!("mode {mode} ({:?}) used on the wrong side", m.chirality)));
        }
        Ok(())
    };
    // Left factors act as a product on the ket: the rightmost applies first.
    for f in term.left.iter().rev() {
        if let Factor::Mode { mode, op } = f {
            check(*mode, Chirality::Right)?;
            steps.push((*mode, if *op == Ladder::Raise { 1 } else { -1 }));
        }
    }
    // Right factors act transposed on the bra: leftmost first, raise lowers the index.
    for f in term.right.iter() {
        if let Factor::Mode { mode, op } = f {
            check(*mode, Chirality::Left)?;
            steps.push((*mode, if *op == Ladder::Raise { -1 } else { 1 }));
        }
    }
    Ok(CompiledTerm { coeff: term.coeff, sys, steps })
}

/// Image of an occupation under the ladder steps, with the accumulated amplitude.
fn apply_steps(occ: &[u16], steps: &[(usize, i8)], n_max: &[usize], cap: Option<usize>) -> Option<(Vec<u16>, f64)> {
    let mut out = occ.to_vec();
    let mut amp = 1.0;
    let mut total: usize = occ.iter().map(|&n| n as usize).sum();
    for &(mode, dir) in steps {
        let n = out[mode] as usize;
        if dir > 0 {
            if n + 1 > n_max[mode] {
                return None;
            }
            amp *= ((n + 1) as f64).sqrt();
            out[mode] += 1;
            total += 1;
        } else {
            if n == 0 {
                return None;
            }
            amp *= (n as f64).sqrt();
            out[mode] -= 1;
            total -= 1;
        }
    }
    if let Some(c) = cap {
        if total > c {
            return None;
        }
    }
    Some((out, amp))
}

/// Matrix of `scale * sum_terms coeff * L rho R` on a purified layout.
pub fn assemble_terms(model: &ModelSpec, layout: &SpaceLayout, terms: &[SuperTerm], scale: Complex64) -> Result<SparseSuperOp> {
    let LayoutKind::Purified { cap, occupations } = &layout.kind else {
        return Err(Error::Assembly("purified terms need a purified layout".into()));
    };
    if layout.d_s != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: layout.d_s });
    }
    if layout.n_max.len() != model.modes.len() {
        return Err(Error::Assembly(format!(
            "layout has {} modes, model has {}",
            layout.n_max.len(),
            model.modes.len()
        )));
    }
    let compiled: Vec<CompiledTerm> = terms.iter().map(|t| compile_term(model, t)).collect::<Result<_>>()?;
    let index: HashMap<&[u16], usize> = occupations.iter().enumerate().map(|(k, o)| (o.as_slice(), k)).collect();
    let n_occ = occupations.len();
    let dim = layout.dim();
    let chunks: Vec<Vec<(usize, usize, Complex64)>> = compiled
        .par_iter()
        .map(|ct| {
            let mut local = Vec::new();
            for (col_occ, occ) in occupations.iter().enumerate() {
                let Some((img, amp)) = apply_steps(occ, &ct.steps, &layout.n_max, *cap) else { continue };
                let Some(&row_occ) = index.get(img.as_slice()) else { continue };
                let c = scale * ct.coeff * amp;
                for &(rs, cs, v) in &ct.sys {
                    local.push((rs * n_occ + row_occ, cs * n_occ + col_occ, c * v));
                }
            }
            local
        })
        .collect();
    let mut trip = Triplets::new(dim, dim);
    for chunk in chunks {
        for (r, c, v) in chunk {
            trip.push(r, c, v);
        }
    }
    let op = trip.into_csr();
    if !op.is_finite() {
        return Err(Error::Assembly("non-finite superoperator entry".into()));
    }
    Ok(op)
}

/// `-i * generator` of a purified model, so that `d(state)/dt = A state`.
pub fn assemble_purified(model: &ModelSpec, n_max: &[usize], cap: Option<usize>) -> Result<(SpaceLayout, SparseSuperOp)> {
    if n_max.len() != model.modes.len() {
        return Err(Error::Assembly(format!(
            "{} truncations given for {} modes",
            n_max.len(),
            model.modes.len()
        )));
    }
    if n_max.iter().any(|&n| n < 1) {
        return Err(Error::Domain("mode truncation must be at least 1".into()));
    }
    let layout = SpaceLayout::purified(model.dim(), n_max, cap)?;
    let op = assemble_terms(model, &layout, &model.generator, Complex64::new(0.0, -1.0))?;
    Ok((layout, op))
}

/// Same truncation for every mode.
pub fn assemble_purified_uniform(model: &ModelSpec, n_max: usize, cap: Option<usize>) -> Result<(SpaceLayout, SparseSuperOp)> {
    assemble_purified(model, &vec![n_max; model.modes.len()], cap)
}

/// Weights of the reduced trace `Tr rho_S` as a linear functional on states.
pub fn trace_functional(layout: &SpaceLayout) -> Vec<(usize, Complex64)> {
    let d = layout.d_s;
    let one = Complex64::new(1.0, 0.0);
    match &layout.kind {
        LayoutKind::Purified { .. } => (0..d).map(|i| ((i * d + i) * layout.n_occ(), one)).collect(),
        LayoutKind::Doubled => {
            let n = d * layout.mode_dim();
            (0..n).map(|k| (k * n + k, one)).collect()
        }
    }
}

/// Reduced system density matrix: vacuum block (purified) or partial trace (doubled).
pub fn extract_rho_s(layout: &SpaceLayout, state: &[Complex64]) -> Result<CMat> {
    if state.len() != layout.dim() {
        return Err(Error::Dimension { expected: layout.dim(), got: state.len() });
    }
    let d = layout.d_s;
    match &layout.kind {
        LayoutKind::Purified { .. } => {
            let n_occ = layout.n_occ();
            Ok(CMat::from_fn(d, d, |i, j| state[(i * d + j) * n_occ]))
        }
        LayoutKind::Doubled => {
            let m = layout.mode_dim();
            let n = d * m;
            Ok(CMat::from_fn(d, d, |i, j| (0..m).map(|k| state[(i * m + k) * n + j * m + k]).sum()))
        }
    }
}

/// Applies the insertion's terms as a matrix (no `-i` factor).
pub fn apply_insertion(
    model: &ModelSpec,
    layout: &SpaceLayout,
    insertion: &crate::modelgen::FieldInsertion,
    state: &[Complex64],
) -> Result<Vec<Complex64>> {
    if state.len() != layout.dim() {
        return Err(Error::Dimension { expected: layout.dim(), got: state.len() });
    }
    let op = assemble_terms(model, layout, &insertion.terms, Complex64::new(1.0, 0.0))?;
    Ok(op.matvec(state))
}

/// Initial state from the model's Wick expansion, normalized so the reduced
/// trace at t = 0 is one. Returns the state and the normalization factor.
pub fn initial_state(model: &ModelSpec, layout: &SpaceLayout) -> Result<(Vec<Complex64>, Complex64)> {
    let base = layout.embed_vacuum(&model.initial.rho_s)?;
    if model.initial.inputs.is_empty() {
        return Ok((base, Complex64::new(1.0, 0.0)));
    }
    let mut ops: HashMap<usize, SparseSuperOp> = HashMap::new();
    for &i in &model.initial.inputs {
        ops.insert(i, assemble_terms(model, layout, &model.insertions[i].terms, Complex64::new(1.0, 0.0))?);
    }
    let mut total = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for term in model.sorted_expansion() {
        let mut v = base.clone();
        for i in &term.insertions {
            v = ops[i].matvec(&v);
        }
        for (t, x) in total.iter_mut().zip(v) {
            *t += term.scalar * x;
        }
    }
    let norm = extract_rho_s(layout, &total)?.trace();
    if norm.norm() < 1e-300 {
        return Err(Error::Domain("input state has zero trace".into()));
    }
    for x in total.iter_mut() {
        *x /= norm;
    }
    Ok((total, norm))
}

#[cfg(test)]
mod tests;
