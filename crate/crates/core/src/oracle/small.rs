//! Small-model references: the Jaynes-Cummings single-excitation sector and
//! the finite-`a` two-mode convergence sweep.

use crate::dynamics::{integrate_observe, sparse_rhs, IntegratorOptions};
use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, max_abs, CMat};
use crate::liouville::{assemble_finite_a, assemble_purified_uniform, extract_rho_s, initial_state, SpaceLayout};
use crate::scenario::single_mode_model;
use crate::sparse::SparseSuperOp;
use num_complex::Complex64;

type C = Complex64;

/// Qubit `H_S = (Omega + detuning) sigma^+ sigma^-` coupled by `lambda (sigma^+ d + sigma^- d^dag)`
/// to a mode of frequency `Omega` damped at `2 Gamma`, qubit initially excited.
///
/// Returns `rho_S(t)` with index 0 the ground state.
pub fn analytic_single_mode(omega: f64, gamma: f64, lambda: f64, detuning: f64, t_grid: &[f64]) -> Vec<CMat> {
    // i d/dt (a, b) = M (a, b) on |e,0>, |g,1>.
    let m11 = C::new(omega + detuning, 0.0);
    let m22 = C::new(omega, -gamma);
    let mu = 0.5 * (m11 + m22);
    let half = 0.5 * (m11 - m22);
    let r = (half * half + lambda * lambda).sqrt();
    t_grid
        .iter()
        .map(|&t| {
            let (cos, sinc) = if r.norm() * t.abs() < 1e-8 {
                (C::new(1.0, 0.0), C::new(t, 0.0))
            } else {
                ((r * t).cos(), (r * t).sin() / r)
            };
            let phase = (C::new(0.0, -1.0) * mu * t).exp();
            let a = phase * (cos - C::new(0.0, 1.0) * sinc * half);
            let pe = a.norm_sqr();
            let mut rho = CMat::zeros(2, 2);
            rho[(1, 1)] = c(pe, 0.0);
            rho[(0, 0)] = c(1.0 - pe, 0.0);
            rho
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteASweep {
    pub a: Vec<f64>,
    /// Sup over the grid of the entrywise `rho_S` deviation from the purified model.
    pub deviation: Vec<f64>,
    /// Worst Hermiticity defect of the finite-`a` reduced states.
    pub hermiticity: Vec<f64>,
}

fn reduced_series(op: &SparseSuperOp, layout: &SpaceLayout, y0: &[C], t_grid: &[f64]) -> Result<Vec<CMat>> {
    let opts = IntegratorOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    let mut out = Vec::with_capacity(t_grid.len());
    integrate_observe(sparse_rhs(op), t_grid[0], y0, t_grid, &opts, |_, _, y| {
        out.push(extract_rho_s(layout, y)?);
        Ok(())
    })?;
    Ok(out)
}

/// Deviation of the two-mode finite-`a` model from the purified single-mode
/// model, for each `a` in `a_list`. `S` must be Hermitian.
#[allow(clippy::too_many_arguments)]
pub fn finite_a_sweep(
    h_s: &CMat,
    s: &CMat,
    rho0: &CMat,
    omega: f64,
    gamma: f64,
    lambda: f64,
    a_list: &[f64],
    n_max: usize,
    t_grid: &[f64],
) -> Result<FiniteASweep> {
    if hermiticity_defect(s) > 1e-14 * max_abs(s).max(1.0) {
        return Err(Error::Domain("finite-a model needs a Hermitian coupling operator".into()));
    }
    if a_list.windows(2).any(|w| w[1] <= w[0]) || a_list.iter().any(|&a| a < 0.0) {
        return Err(Error::Domain("a_list must be non-negative and increasing".into()));
    }
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    let mut model = single_mode_model(h_s, s, omega, gamma, lambda)?;
    model.set_initial_rho(rho0.clone());
    let (layout, op) = assemble_purified_uniform(&model, n_max, None)?;
    let (y0, _) = initial_state(&model, &layout)?;
    let reference = reduced_series(&op, &layout, &y0, t_grid)?;
    let mut sweep = FiniteASweep { a: a_list.to_vec(), deviation: Vec::new(), hermiticity: Vec::new() };
    for &a in a_list {
        let (layout, op) = assemble_finite_a(h_s, s, omega, gamma, lambda, a, n_max)?;
        let y0 = layout.embed_vacuum(rho0)?;
        let series = reduced_series(&op, &layout, &y0, t_grid)?;
        let dev = series.iter().zip(&reference).map(|(x, r)| max_abs(&(x - r))).fold(0.0, f64::max);
        let herm = series.iter().map(hermiticity_defect).fold(0.0, f64::max);
        sweep.deviation.push(dev);
        sweep.hermiticity.push(herm);
    }
    Ok(sweep)
}
