//! Dormand–Prince 5(4) with Hairer's continuous extension.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

type C = Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Below this length vector updates run serially.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated when `None`.
    pub h0: Option<f64>,
    /// Largest allowed step; unbounded when `None`.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, h0: None, h_max: None, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn lincomb(out: &mut [C], y: &[C], h: f64, ks: &[(&[C], f64)]) {
    let body = |(i, o): (usize, &mut C)| {
        let mut acc = C::new(0.0, 0.0);
        for (k, a) in ks {
            if *a != 0.0 {
                acc += k[i] * *a;
            }
        }
        *o = y[i] + acc * h;
    };
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(body);
    } else {
        out.iter_mut().enumerate().for_each(body);
    }
}

fn error_vector(out: &mut [C], h: f64, ks: &[(&[C], f64)]) {
    let body = |(i, o): (usize, &mut C)| {
        *o = ks.iter().map(|(k, e)| k[i] * *e).sum::<C>() * h;
    };
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(body);
    } else {
        out.iter_mut().enumerate().for_each(body);
    }
}

fn error_norm(y: &[C], ynew: &[C], err: &[C], rtol: f64, atol: f64) -> f64 {
    let term = |i: usize| {
        let sk = atol + rtol * y[i].norm().max(ynew[i].norm());
        (err[i].norm() / sk).powi(2)
    };
    let sum: f64 = if y.len() >= PAR_THRESHOLD {
        (0..y.len()).into_par_iter().map(term).sum()
    } else {
        (0..y.len()).map(term).sum()
    };
    (sum / y.len().max(1) as f64).sqrt()
}

/// Integrates `y' = f(t, y)` and calls `observe(k, t_k, y(t_k))` for every grid time.
///
/// The grid must be non-decreasing and start at or after `t0`.
pub fn integrate_observe<F, O>(
    f: F,
    t0: f64,
    y0: &[C],
    grid: &[f64],
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<StepStats>
where
    F: Fn(f64, &[C], &mut [C]),
    O: FnMut(usize, f64, &[C]) -> Result<()>,
{
    let n = y0.len();
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&g| g < t0) {
        return Err(Error::Domain("time grid must be non-decreasing and start at t0".into()));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }
    let mut stats = StepStats::default();
    let mut next = 0;
    while next < grid.len() && grid[next] == t0 {
        observe(next, t0, y0)?;
        next += 1;
    }
    if next == grid.len() {
        return Ok(stats);
    }
    let t_end = *grid.last().unwrap();
    let zero = C::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut dense = vec![zero; n];
    f(t0, &y, &mut k1);
    stats.evaluations += 1;
    let mut t = t0;
    let span = t_end - t0;
    let mut h = match opts.h0 {
        Some(h) => h,
        None => initial_step(&y, &k1, opts, span),
    };
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }
    let h_min = 1e-14 * t_end.abs().max(span).max(1e-300);
    let mut last_fac = 1e-4f64;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::NoConvergence(format!("step budget exhausted at t = {t}")));
        }
        if t_end - t <= h_min {
            while next < grid.len() {
                observe(next, grid[next], &y)?;
                next += 1;
            }
            return Ok(stats);
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h < h_min {
            return Err(Error::Stiffness { t });
        }
        lincomb(&mut tmp, &y, h, &[(&k1, A21)]);
        f(t + C2 * h, &tmp, &mut k2);
        lincomb(&mut tmp, &y, h, &[(&k1, A31), (&k2, A32)]);
        f(t + C3 * h, &tmp, &mut k3);
        lincomb(&mut tmp, &y, h, &[(&k1, A41), (&k2, A42), (&k3, A43)]);
        f(t + C4 * h, &tmp, &mut k4);
        lincomb(&mut tmp, &y, h, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]);
        f(t + C5 * h, &tmp, &mut k5);
        lincomb(&mut tmp, &y, h, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]);
        f(t + h, &tmp, &mut k6);
        lincomb(&mut ynew, &y, h, &[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)]);
        f(t + h, &ynew, &mut k7);
        stats.evaluations += 6;
        error_vector(&mut tmp, h, &[(&k1, E1), (&k3, E3), (&k4, E4), (&k5, E5), (&k6, E6), (&k7, E7)]);
        let err = error_norm(&y, &ynew, &tmp, opts.rtol, opts.atol);
        if !err.is_finite() {
            h *= 0.1;
            stats.rejected += 1;
            continue;
        }
        if err <= 1.0 {
            let t_new = t + h;
            while next < grid.len() && grid[next] <= t_new {
                let theta = (grid[next] - t) / h;
                dense_output(&mut dense, &y, &ynew, &[&k1, &k3, &k4, &k5, &k6, &k7], h, theta);
                observe(next, grid[next], &dense)?;
                next += 1;
            }
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            stats.accepted += 1;
            if next >= grid.len() {
                return Ok(stats);
            }
            // PI step control with beta = 0.04.
            let fac = err.max(1e-12).powf(0.2 - 0.04 * 0.75) / last_fac.powf(0.04);
            last_fac = err.max(1e-4);
            h /= (fac / 0.9).clamp(0.1, 5.0);
        } else {
            stats.rejected += 1;
            h /= (err.powf(0.2 - 0.04 * 0.75) / 0.9).min(5.0);
        }
        if let Some(hm) = opts.h_max {
            h = h.min(hm);
        }
    }
}

fn dense_output(out: &mut [C], y: &[C], ynew: &[C], k: &[&[C]; 6], h: f64, theta: f64) {
    let [k1, k3, k4, k5, k6, k7] = *k;
    let t1 = 1.0 - theta;
    let body = |(i, o): (usize, &mut C)| {
        let r2 = ynew[i] - y[i];
        let r3 = k1[i] * h - r2;
        let r4 = r2 - k7[i] * h - r3;
        let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
        *o = y[i] + (r2 + (r3 + (r4 + r5 * t1) * theta) * t1) * theta;
    };
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(body);
    } else {
        out.iter_mut().enumerate().for_each(body);
    }
}

fn initial_step(y: &[C], f0: &[C], opts: &IntegratorOptions, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sk = opts.atol + opts.rtol * yi.norm();
        d0 += (yi.norm() / sk).powi(2);
        d1 += (fi.norm() / sk).powi(2);
    }
    let (d0, d1) = (d0.sqrt(), d1.sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.max(1e-300))
}

/// Fixed-step Dormand–Prince (fifth-order solution) for convergence studies.
pub fn integrate_fixed<F>(f: F, t0: f64, y0: &[C], t_end: f64, steps: usize) -> Vec<C>
where
    F: Fn(f64, &[C], &mut [C]),
{
    let n = y0.len();
    let zero = C::new(0.0, 0.0);
    let h = (t_end - t0) / steps.max(1) as f64;
    let mut y = y0.to_vec();
    let mut ks = vec![vec![zero; n]; 6];
    let mut tmp = vec![zero; n];
    let mut t = t0;
    for _ in 0..steps {
        f(t, &y, &mut ks[0]);
        let (k1, rest) = ks.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, rest) = rest.split_at_mut(1);
        let (k4, rest) = rest.split_at_mut(1);
        let (k5, k6) = rest.split_at_mut(1);
        let (k1, k2, k3, k4, k5, k6) = (&mut k1[0], &mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0]);
        lincomb(&mut tmp, &y, h, &[(k1, A21)]);
        f(t + C2 * h, &tmp, k2);
        lincomb(&mut tmp, &y, h, &[(k1, A31), (k2, A32)]);
        f(t + C3 * h, &tmp, k3);
        lincomb(&mut tmp, &y, h, &[(k1, A41), (k2, A42), (k3, A43)]);
        f(t + C4 * h, &tmp, k4);
        lincomb(&mut tmp, &y, h, &[(k1, A51), (k2, A52), (k3, A53), (k4, A54)]);
        f(t + C5 * h, &tmp, k5);
        lincomb(&mut tmp, &y, h, &[(k1, A61), (k2, A62), (k3, A63), (k4, A64), (k5, A65)]);
        f(t + h, &tmp, k6);
        lincomb(&mut tmp, &y, h, &[(k1, A71), (k3, A73), (k4, A74), (k5, A75), (k6, A76)]);
        std::mem::swap(&mut y, &mut tmp);
        t += h;
    }
    y
}
