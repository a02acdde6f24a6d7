//! Oracle assemblies on the full density matrix of system plus pseudomodes.

use super::{check_square, SpaceLayout};
use crate::error::{Error, Result};
use crate::linalg::{dagger, destroy, embed, identity, sigma_minus, CMat};
use crate::sparse::{SparseSuperOp, Triplets};
use crate::waveguide::WaveguideParams;
use num_complex::Complex64;

/// `sum coeff * (L rho R)` as a matrix on the row-major vectorized `rho`.
pub fn superop_from_terms(dim: usize, terms: &[(Complex64, CMat, CMat)]) -> Result<SparseSuperOp> {
    let mut trip = Triplets::new(dim * dim, dim * dim);
    for (coeff, l, r) in terms {
        check_square(l, dim)?;
        check_square(r, dim)?;
        let lnz: Vec<(usize, usize, Complex64)> = nonzeros(l);
        let rnz: Vec<(usize, usize, Complex64)> = nonzeros(r);
        // (L rho R)[i,j] = sum L[i,k] rho[k,l] R[l,j]
        for &(i, k, lv) in &lnz {
            for &(lr, j, rv) in &rnz {
                trip.push(i * dim + j, k * dim + lr, coeff * lv * rv);
            }
        }
    }
    let op = trip.into_csr();
    if !op.is_finite() {
        return Err(Error::Assembly("non-finite superoperator entry".into()));
    }
    Ok(op)
}

fn nonzeros(m: &CMat) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != Complex64::new(0.0, 0.0) {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

/// Appends `-i [K, .]` (K need not be Hermitian).
fn push_commutator(terms: &mut Vec<(Complex64, CMat, CMat)>, k: &CMat) {
    let id = identity(k.nrows());
    terms.push((Complex64::new(0.0, -1.0), k.clone(), id.clone()));
    terms.push((Complex64::new(0.0, 1.0), id, k.clone()));
}

/// Appends `rate * (J rho J^dag - {J^dag J, rho} / 2)`.
fn push_dissipator(terms: &mut Vec<(Complex64, CMat, CMat)>, j: &CMat, rate: f64) {
    let jd = dagger(j);
    let jdj = &jd * j;
    let id = identity(j.nrows());
    terms.push((Complex64::new(rate, 0.0), j.clone(), jd));
    terms.push((Complex64::new(-0.5 * rate, 0.0), jdj.clone(), id.clone()));
    terms.push((Complex64::new(-0.5 * rate, 0.0), id, jdj));
}

/// `-i [H, .] + sum_k rate_k D[J_k]` on the row-major vectorized density matrix.
pub fn lindblad_superop(h: &CMat, jumps: &[(CMat, f64)]) -> Result<SparseSuperOp> {
    let mut terms = Vec::new();
    push_commutator(&mut terms, h);
    for (j, rate) in jumps {
        push_dissipator(&mut terms, j, *rate);
    }
    superop_from_terms(h.nrows(), &terms)
}

/// Single damped pseudomode: `H = H_S + Omega d^dag d + lambda (S d + S^dag d^dag)`,
/// jump operator `d` with rate `2 Gamma`.
pub fn assemble_conventional_pm(
    h_s: &CMat,
    s: &CMat,
    omega: f64,
    gamma: f64,
    lambda: f64,
    n_max: usize,
) -> Result<(SpaceLayout, SparseSuperOp)> {
    if gamma < 0.0 {
        return Err(Error::Domain(format!("negative damping {gamma}")));
    }
    let d_s = h_s.nrows();
    check_square(s, d_s)?;
    let dims = [d_s, n_max + 1];
    let a = embed(&destroy(n_max), 1, &dims);
    let sys = |m: &CMat| embed(m, 0, &dims);
    let ss = sys(s);
    let h = sys(h_s) + dagger(&a) * &a * Complex64::new(omega, 0.0) + (&ss * &a + dagger(&ss) * dagger(&a)) * Complex64::new(lambda, 0.0);
    let mut terms = Vec::new();
    push_commutator(&mut terms, &h);
    push_dissipator(&mut terms, &a, 2.0 * gamma);
    let layout = SpaceLayout::doubled(d_s, &[n_max]);
    let op = superop_from_terms(d_s * (n_max + 1), &terms)?;
    Ok((layout, op))
}

/// Two large-`a` pseudomodes with frequencies `Omega +- i a` and damping `Gamma + a`,
/// all couplings `lambda` and all coupling operators `S`.
pub fn assemble_finite_a(
    h_s: &CMat,
    s: &CMat,
    omega: f64,
    gamma: f64,
    lambda: f64,
    a: f64,
    n_max: usize,
) -> Result<(SpaceLayout, SparseSuperOp)> {
    if a < 0.0 {
        return Err(Error::Domain(format!("negative continuation parameter a = {a}")));
    }
    let d_s = h_s.nrows();
    check_square(s, d_s)?;
    let dims = [d_s, n_max + 1, n_max + 1];
    let dp = embed(&destroy(n_max), 1, &dims);
    let dm = embed(&destroy(n_max), 2, &dims);
    let ss = embed(s, 0, &dims);
    let np = dagger(&dp) * &dp;
    let nm = dagger(&dm) * &dm;
    let k = embed(h_s, 0, &dims) + &np * Complex64::new(omega, a) + &nm * Complex64::new(omega, -a);
    let mut terms = Vec::new();
    push_commutator(&mut terms, &k);
    let id = identity(k.nrows());
    let mi = Complex64::new(0.0, -1.0);
    for d in [&dp, &dm] {
        let sd = &ss * d;
        let sdd = &ss * dagger(d);
        terms.push((mi * lambda, sd.clone(), id.clone()));
        terms.push((mi * lambda, sdd.clone(), id.clone()));
        terms.push((-mi * lambda, id.clone(), sd));
        terms.push((-mi * lambda, id.clone(), sdd));
        push_dissipator(&mut terms, d, 2.0 * (gamma + a));
    }
    let layout = SpaceLayout::doubled(d_s, &[n_max, n_max]);
    let op = superop_from_terms(d_s * (n_max + 1) * (n_max + 1), &terms)?;
    Ok((layout, op))
}

/// Operators of the two-emitter, two-cavity Hilbert space `e1 (x) e2 (x) c1 (x) c2`.
#[derive(Debug, Clone)]
pub struct Case1Layout {
    pub layout: SpaceLayout,
    pub sigma_minus: [CMat; 2],
    pub cavity: [CMat; 2],
}

impl Case1Layout {
    pub fn new(n_max: usize) -> Self {
        let dims = [2, 2, n_max + 1, n_max + 1];
        Self {
            layout: SpaceLayout::doubled(4, &[n_max, n_max]),
            sigma_minus: [embed(&sigma_minus(), 0, &dims), embed(&sigma_minus(), 1, &dims)],
            cavity: [embed(&destroy(n_max), 2, &dims), embed(&destroy(n_max), 3, &dims)],
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        4 * self.layout.mode_dim()
    }
}

/// Markovian emitter-cavity master equation in the frame rotating at `omega_r`.
///
/// Intrinsic cavity loss enters as an extra local dissipator so that this
/// reference matches the cavity correlations built from `delta_n`.
pub fn assemble_case1_lindblad(p: &WaveguideParams, omega_r: f64, n_max: usize) -> Result<(Case1Layout, SparseSuperOp)> {
    p.validate()?;
    let ops = Case1Layout::new(n_max);
    let dim = ops.hilbert_dim();
    let mut h = CMat::zeros(dim, dim);
    for n in 0..2 {
        let sm = &ops.sigma_minus[n];
        let cn = &ops.cavity[n];
        let (sp, cd) = (dagger(sm), dagger(cn));
        h += &sp * sm * Complex64::new(p.omega_e(n) - omega_r, 0.0);
        h += &cd * cn * Complex64::new(p.omega_c(n) - omega_r, 0.0);
        h += (&sp * cn + sm * &cd) * Complex64::new(p.coupling(n), 0.0);
    }
    let mut terms = Vec::new();
    push_commutator(&mut terms, &h);
    for n in 0..2 {
        push_dissipator(&mut terms, &ops.cavity[n], p.kappa(n) + p.kappa_i(n));
    }
    let g = 0.5 * (p.kappa1 * p.kappa2).sqrt();
    let id = identity(dim);
    let ph = Complex64::from_polar(1.0, p.theta());
    for (n, m) in [(0usize, 1usize), (1, 0)] {
        let (cn, cm) = (&ops.cavity[n], &ops.cavity[m]);
        let (cnd, cmd) = (dagger(cn), dagger(cm));
        terms.push((g * ph.conj(), cm.clone(), cnd.clone()));
        terms.push((-g * ph.conj(), id.clone(), &cnd * cm));
        terms.push((g * ph, cn.clone(), cmd.clone()));
        terms.push((-g * ph, &cmd * cn, id.clone()));
    }
    let op = superop_from_terms(dim, &terms)?;
    Ok((ops, op))
}

/// Full density matrix of a doubled-layout state.
pub fn full_density(layout: &SpaceLayout, state: &[Complex64]) -> Result<CMat> {
    let n = layout.d_s * layout.mode_dim();
    if state.len() != n * n {
        return Err(Error::Dimension { expected: n * n, got: state.len() });
    }
    Ok(CMat::from_row_slice(n, n, state))
}

/// `Tr(op rho)` on a doubled layout.
pub fn expectation_doubled(layout: &SpaceLayout, state: &[Complex64], op: &CMat) -> Result<Complex64> {
    let rho = full_density(layout, state)?;
    check_square(op, rho.nrows())?;
    Ok((op * rho).trace())
}

