//! Exponential-sum fitting: matrix-pencil seed followed by damped
//! Gauss-Newton refinement of the poles, with the weights re-solved by
//! linear least squares after every accepted step.

use super::{reconstruction_error, ExpTerm};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

const MAX_PENCIL: usize = 160;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub n_terms: usize,
    /// Absolute max-deviation the fit must reach.
    pub max_residual: f64,
    /// Pencil parameter; `None` picks a size from the sample count.
    pub pencil: Option<usize>,
    pub max_iter: usize,
    /// Reweighting passes pushing the least-squares fit towards minimax.
    pub minimax_passes: usize,
}

impl FitOptions {
    pub fn new(n_terms: usize, max_residual: f64) -> Self {
        Self { n_terms, max_residual, pencil: None, max_iter: 200, minimax_passes: 6 }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub terms: Vec<ExpTerm>,
    pub residual: f64,
}

pub fn fit_exponentials(
    samples: &[(f64, Complex64)],
    n_terms: usize,
    max_residual: f64,
) -> Result<FitResult> {
    fit_exponentials_with(samples, &FitOptions::new(n_terms, max_residual))
}

pub fn fit_exponentials_with(samples: &[(f64, Complex64)], opts: &FitOptions) -> Result<FitResult> {
    if opts.n_terms == 0 {
        return Err(Error::Config("n_terms must be positive".into()));
    }
    if samples.len() < 2 * opts.n_terms + 2 {
        return Err(Error::Config(format!(
            "{} samples cannot determine {} terms",
            samples.len(),
            opts.n_terms
        )));
    }
    check_uniform(samples)?;
    let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<Complex64> = samples.iter().map(|s| s.1).collect();

    let uniform = vec![1.0; ts.len()];
    let y = DVector::from_column_slice(&ys);
    let mut poles = pencil_poles(&ts, &ys, opts.n_terms, opts.pencil)?;
    for s in poles.iter_mut() {
        if s.re > 0.0 {
            s.re = -s.re;
        }
    }
    let (refined, weights) = loop {
        let (refined, weights) = refine(&ts, &y, poles, opts.max_iter, &uniform)?;
        match growing_pole(&refined) {
            Some(k) => {
                log::debug!("growing pole {} dropped, refitting with {} terms", refined[k], refined.len() - 1);
                poles = refined;
                poles.remove(k);
            }
            None => break (refined, weights),
        }
    };
    let mut best = to_terms(&refined, &weights);
    let mut residual = reconstruction_error(&best, samples);
    if residual > opts.max_residual {
        // Lawson reweighting moves the least-squares optimum towards the minimax one.
        let mut u = vec![1.0 / ts.len() as f64; ts.len()];
        let mut current = refined;
        let mut current_terms = best.clone();
        for _ in 0..opts.minimax_passes {
            for (ui, &(t, v)) in u.iter_mut().zip(samples) {
                let model: Complex64 = current_terms.iter().map(|term| term.eval_unchecked(t)).sum();
                *ui *= (model - v).norm();
            }
            let total: f64 = u.iter().sum();
            if !(total > 0.0) {
                break;
            }
            let floor = 1e-6 / ts.len() as f64;
            u.iter_mut().for_each(|v| *v = (*v / total).max(floor));
            let rows: Vec<f64> = u.iter().map(|v| v.sqrt()).collect();
            let Ok((next, w)) = refine(&ts, &y, current.clone(), opts.max_iter / 4, &rows) else { break };
            if growing_pole(&next).is_some() {
                break;
            }
            current = next;
            current_terms = to_terms(&current, &w);
            let r = reconstruction_error(&current_terms, samples);
            if r < residual {
                residual = r;
                best = current_terms.clone();
            }
            if residual <= opts.max_residual {
                break;
            }
        }
    }
    if residual <= opts.max_residual {
        Ok(FitResult { terms: best, residual })
    } else {
        Err(Error::FitFailure { residual, tolerance: opts.max_residual, best })
    }
}

fn growing_pole(poles: &[Complex64]) -> Option<usize> {
    if poles.len() <= 1 {
        return None;
    }
    let scale = poles.iter().map(|s| s.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    poles
        .iter()
        .enumerate()
        .filter(|(_, s)| s.re > 1e-12 * scale)
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(k, _)| k)
}

fn to_terms(poles: &[Complex64], weights: &[Complex64]) -> Vec<ExpTerm> {
    poles
        .iter()
        .zip(weights)
        .map(|(&s, &w)| {
            let mut t = ExpTerm::from_pole(w, s);
            t.gamma = t.gamma.max(0.0);
            t
        })
        .collect()
}

fn check_uniform(samples: &[(f64, Complex64)]) -> Result<()> {
    let dt = samples[1].0 - samples[0].0;
    if !(dt > 0.0) {
        return Err(Error::Config("sample times must increase".into()));
    }
    for (k, s) in samples.iter().enumerate() {
        let expected = samples[0].0 + k as f64 * dt;
        if (s.0 - expected).abs() > 1e-8 * dt.max(expected.abs() * 1e-6) + 1e-9 * dt * k as f64 {
            return Err(Error::Config(format!("sample {k} is off the uniform grid")));
        }
        if !(s.1.re.is_finite() && s.1.im.is_finite()) {
            return Err(Error::Domain(format!("sample {k} is not finite")));
        }
    }
    Ok(())
}

/// Largest sampling stride that keeps the significant spectral content below Nyquist.
fn alias_free_stride(ys: &[Complex64], dt: f64) -> usize {
    let n = ys.len();
    let mut buf = ys.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 1;
    }
    let mut bin_max = 0usize;
    for (k, &p) in power.iter().enumerate() {
        if p >= 1e-10 * peak {
            let signed = if k <= n / 2 { k } else { n - k };
            bin_max = bin_max.max(signed);
        }
    }
    if bin_max == 0 {
        return n;
    }
    let omega_max = 2.0 * std::f64::consts::PI * bin_max as f64 / (n as f64 * dt);
    ((std::f64::consts::PI / (1.5 * omega_max * dt)).floor() as usize).max(1)
}

/// Poles `s_k` such that `y(t) ~ sum w_k exp(s_k t)`.
fn pencil_poles(ts: &[f64], ys: &[Complex64], n: usize, pencil: Option<usize>) -> Result<Vec<Complex64>> {
    // Seed on a decimated grid so the pencil spans a third of the window.
    let stride = alias_free_stride(ys, ts[1] - ts[0]).min(ys.len() / (3 * (n + 1)).max(1)).min(ys.len() / 3 / MAX_PENCIL).max(1);
    let ys: Vec<Complex64> = ys.iter().step_by(stride).copied().collect();
    let ts: Vec<f64> = ts.iter().step_by(stride).copied().collect();
    let (ts, ys) = (&ts[..], &ys[..]);
    let len = ys.len();
    let dt = ts[1] - ts[0];
    let l = pencil.unwrap_or_else(|| (len / 3).min(MAX_PENCIL)).max(n + 1).min(len - n - 1);
    let rows = len - l;
    let hankel = CMat::from_fn(rows, l + 1, |i, j| ys[i + j]);
    let svd = hankel
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NoConvergence("pencil SVD".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::NoConvergence("pencil SVD".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sig = CMat::from_fn(n, l + 1, |k, j| v_t[(order[k], j)]);
    let v1 = sig.columns(0, l).into_owned();
    let v2 = sig.columns(1, l).into_owned();
    let gram = &v1 * v1.adjoint();
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::NoConvergence("pencil Gram matrix is singular".into()))?;
    let x = &v2 * v1.adjoint() * gram_inv;
    let eig = x
        .try_schur(f64::EPSILON, 10_000)
        .and_then(|s| s.eigenvalues())
        .ok_or_else(|| Error::NoConvergence("pencil eigenvalues".into()))?;
    Ok(eig
        .iter()
        .map(|&z| {
            let z = if z.norm() == 0.0 { Complex64::new(1e-300, 0.0) } else { z };
            z.ln() / dt
        })
        .collect())
}

fn basis(ts: &[f64], poles: &[Complex64]) -> CMat {
    CMat::from_fn(ts.len(), poles.len(), |i, k| (poles[k] * ts[i]).exp())
}

/// Row-weighted linear least squares for the weights at fixed poles.
fn solve_weights(ts: &[f64], ys: &DVector<Complex64>, poles: &[Complex64], rows: &[f64]) -> Result<DVector<Complex64>> {
    let mut phi = basis(ts, poles);
    if phi.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NoConvergence("basis overflow".into()));
    }
    for (i, &r) in rows.iter().enumerate() {
        phi.row_mut(i).scale_mut(r);
    }
    let rhs = DVector::from_fn(ys.len(), |i, _| ys[i] * rows[i]);
    let svd = phi
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NoConvergence("weight SVD".into()))?;
    let smax = svd.singular_values.max();
    svd.solve(&rhs, smax * 1e-14)
        .map_err(|e| Error::NoConvergence(format!("weight solve: {e}")))
}

fn cost(ts: &[f64], ys: &DVector<Complex64>, poles: &[Complex64], w: &DVector<Complex64>, rows: &[f64]) -> f64 {
    let r = ys - basis(ts, poles) * w;
    r.iter().zip(rows).map(|(v, &s)| v.norm_sqr() * s * s).sum()
}

/// Damped Gauss-Newton on the poles and weights jointly; the weights are
/// re-projected after every accepted step.
fn refine(
    ts: &[f64],
    y: &DVector<Complex64>,
    mut poles: Vec<Complex64>,
    max_iter: usize,
    rows: &[f64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = poles.len();
    let t_span = ts[ts.len() - 1] - ts[0];
    let mut w = solve_weights(ts, y, &poles, rows)?;
    let mut f = cost(ts, y, &poles, &w, rows);
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        if f == 0.0 {
            break;
        }
        let phi = basis(ts, &poles);
        let r = y - &phi * &w;
        let mut jac = DMatrix::<Complex64>::zeros(ts.len(), 2 * n);
        let mut rw = DVector::<Complex64>::zeros(ts.len());
        for i in 0..ts.len() {
            rw[i] = r[i] * rows[i];
            for k in 0..n {
                jac[(i, k)] = phi[(i, k)] * rows[i];
                jac[(i, n + k)] = w[k] * ts[i] * phi[(i, k)] * rows[i];
            }
        }
        let a = jac.adjoint() * &jac;
        let g = jac.adjoint() * &rw;
        let mut accepted = false;
        while mu < 1e14 {
            let mut damped = a.clone();
            for d in 0..2 * n {
                let diag = a[(d, d)].re;
                damped[(d, d)] += Complex64::new(mu * diag + 1e-300, 0.0);
            }
            let Some(step) = damped.lu().solve(&g) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<Complex64> = (0..n).map(|k| poles[k] + step[n + k]).collect();
            if trial.iter().any(|s| !(s.re.is_finite() && s.im.is_finite()) || s.re * t_span > 50.0) {
                mu *= 10.0;
                continue;
            }
            let Ok(w_trial) = solve_weights(ts, y, &trial, rows) else {
                mu *= 10.0;
                continue;
            };
            let f_trial = cost(ts, y, &trial, &w_trial, rows);
            if f_trial < f {
                let gain = (f - f_trial) / f;
                poles = trial;
                w = w_trial;
                f = f_trial;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if gain < 1e-12 {
                    return Ok((poles, w.iter().copied().collect()));
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    Ok((poles, w.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrlib::eval_decomposition;
    use crate::linalg::c;

    fn sample(terms: &[ExpTerm], n: usize, dt: f64) -> Vec<(f64, Complex64)> {
        (0..n).map(|k| (k as f64 * dt, eval_decomposition(terms, k as f64 * dt).unwrap())).collect()
    }

    #[test]
    fn recovers_two_terms() {
        let truth = vec![
            ExpTerm::new(c(1.0, 0.0), 1.0, 0.5),
            ExpTerm::new(c(0.3, -0.2), -2.0, 1.5),
        ];
        let samples = sample(&truth, 400, 0.02);
        let fit = fit_exponentials(&samples, 2, 1e-8).unwrap();
        assert!(fit.residual < 1e-10);
        let mut got = fit.terms.clone();
        got.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        assert!((got[1].omega - 1.0).abs() < 1e-6 && (got[1].gamma - 0.5).abs() < 1e-6);
        assert!((got[0].w - c(0.3, -0.2)).norm() < 1e-6);
    }

    #[test]
    fn reports_best_attempt_on_failure() {
        let truth = vec![
            ExpTerm::new(c(1.0, 0.0), 3.0, 0.2),
            ExpTerm::new(c(1.0, 0.0), -3.0, 0.4),
        ];
        let samples = sample(&truth, 300, 0.02);
        match fit_exponentials(&samples, 1, 1e-10) {
            Err(Error::FitFailure { residual, best, .. }) => {
                assert!(residual > 1e-10);
                assert_eq!(best.len(), 1);
            }
            other => panic!("expected FitFailure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_irregular_grid() {
        let mut samples = sample(&[ExpTerm::new(c(1.0, 0.0), 0.0, 1.0)], 20, 0.1);
        samples[7].0 += 0.03;
        assert!(matches!(fit_exponentials(&samples, 1, 1e-6), Err(Error::Config(_))));
    }
}
