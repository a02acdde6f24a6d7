//! Time integration, steady states, quantum-regression correlations and spectra.

mod engine;
mod integrate;

pub use engine::{Engine, Propagator, DIRECT_SOLVE_LIMIT};

pub use integrate::{integrate_fixed, integrate_observe, IntegratorOptions, StepStats};

use crate::csvio::Table;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::sparse::SparseSuperOp;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::BTreeMap;

type C = Complex64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Full states at each time when requested.
    pub states: Vec<Vec<C>>,
    pub observables: BTreeMap<String, Vec<C>>,
}

impl Trajectory {
    pub fn observable(&self, name: &str) -> Option<&[C]> {
        self.observables.get(name).map(|v| v.as_slice())
    }

    pub fn real(&self, name: &str) -> Option<Vec<f64>> {
        self.observable(name).map(|v| v.iter().map(|z| z.re).collect())
    }

    /// `t,<name>_re,<name>_im,...` in name order.
    pub fn to_table(&self) -> Table {
        let mut header = vec!["t".to_string()];
        for name in self.observables.keys() {
            header.push(format!("{name}_re"));
            header.push(format!("{name}_im"));
        }
        let mut table = Table::new(&header).with_meta("time_unit", "ps");
        for (k, &t) in self.times.iter().enumerate() {
            let mut row = vec![t];
            for series in self.observables.values() {
                row.push(series[k].re);
                row.push(series[k].im);
            }
            table.push(row);
        }
        table
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        let times = table.column("t").ok_or_else(|| Error::Parse("trajectory table has no 't' column".into()))?;
        let mut observables = BTreeMap::new();
        for h in &table.header {
            if let Some(name) = h.strip_suffix("_re") {
                let re = table.column(h).unwrap();
                let im = table
                    .column(&format!("{name}_im"))
                    .ok_or_else(|| Error::Parse(format!("missing column {name}_im")))?;
                observables.insert(name.to_string(), re.into_iter().zip(im).map(|(a, b)| C::new(a, b)).collect());
            }
        }
        Ok(Self { times, states: Vec::new(), observables })
    }
}

/// Named scalar readouts of a state.
pub type Observable<'a> = Box<dyn Fn(&[C]) -> Result<C> + Sync + 'a>;

/// Integrates from `t_grid[0]` and records the observables (and optionally the states).
pub fn integrate<F>(
    rhs: F,
    y0: &[C],
    t_grid: &[f64],
    opts: &IntegratorOptions,
    observables: &[(String, Observable<'_>)],
    keep_states: bool,
) -> Result<Trajectory>
where
    F: Fn(f64, &[C], &mut [C]),
{
    if t_grid.is_empty() {
        return Ok(Trajectory::default());
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("trajectory times must be strictly increasing".into()));
    }
    let mut traj = Trajectory { times: t_grid.to_vec(), ..Default::default() };
    for (name, _) in observables {
        traj.observables.insert(name.clone(), Vec::with_capacity(t_grid.len()));
    }
    integrate_observe(rhs, t_grid[0], y0, t_grid, opts, |_, _, y| {
        for (name, obs) in observables {
            let v = obs(y)?;
            traj.observables.get_mut(name).unwrap().push(v);
        }
        if keep_states {
            traj.states.push(y.to_vec());
        }
        Ok(())
    })?;
    Ok(traj)
}

/// Uniform grid `0, dt, ..., t_max` (inclusive up to rounding).
pub fn uniform_grid(t_max: f64, n_points: usize) -> Vec<f64> {
    if n_points < 2 {
        return vec![0.0];
    }
    let dt = t_max / (n_points - 1) as f64;
    (0..n_points).map(|k| k as f64 * dt).collect()
}

pub fn sparse_rhs(op: &SparseSuperOp) -> impl Fn(f64, &[C], &mut [C]) + '_ {
    move |_, y, out| op.matvec_into(y, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteadyMethod {
    /// Null space for dimensions up to `DENSE_STEADY_MAX`, integration beyond.
    Auto,
    NullSpace,
    Integrate { t_chunk: f64, t_max: f64 },
}

pub const DENSE_STEADY_MAX: usize = 4096;

/// Fixed point of `y' = A y` with `sum_k w_k y_k = 1` for the trace functional `trace`.
///
/// `y0` seeds the integration method and is ignored by the null-space method.
pub fn steady_state(op: &SparseSuperOp, trace: &[(usize, C)], y0: &[C], method: SteadyMethod, tol: f64) -> Result<Vec<C>> {
    let n = op.dim();
    if trace.is_empty() {
        return Err(Error::Domain("empty trace functional".into()));
    }
    let method = match method {
        SteadyMethod::Auto if n <= DENSE_STEADY_MAX => SteadyMethod::NullSpace,
        SteadyMethod::Auto => SteadyMethod::Integrate { t_chunk: 10.0, t_max: 1e5 },
        m => m,
    };
    let y = match method {
        SteadyMethod::NullSpace => {
            let mut a = DMatrix::<C>::zeros(n, n);
            for (r, c, v) in op.triplets() {
                a[(r, c)] += v;
            }
            // The trace functional annihilates A, so one of its rows is redundant.
            let r0 = trace[0].0;
            for c in 0..n {
                a[(r0, c)] = C::new(0.0, 0.0);
            }
            for &(k, w) in trace {
                a[(r0, k)] = w;
            }
            let mut b = DVector::<C>::zeros(n);
            b[r0] = C::new(1.0, 0.0);
            let x = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::NoConvergence("steady-state system is singular".into()))?;
            x.iter().copied().collect::<Vec<C>>()
        }
        SteadyMethod::Integrate { t_chunk, t_max } => {
            if y0.len() != n {
                return Err(Error::Dimension { expected: n, got: y0.len() });
            }
            relax_to_steady(sparse_rhs(op), y0, t_chunk, t_max, tol)?
        }
        SteadyMethod::Auto => unreachable!(),
    };
    let norm: C = trace.iter().map(|&(k, w)| w * y[k]).sum();
    let y: Vec<C> = y.iter().map(|z| z / norm).collect();
    let res = residual(op, &y);
    if res > tol {
        return Err(Error::NoConvergence(format!("steady-state residual {res:.3e} exceeds {tol:.1e}")));
    }
    Ok(y)
}

/// Integrates `y' = f(y)` in chunks until `||f(y)|| <= tol ||y||`.
pub fn relax_to_steady<F>(rhs: F, y0: &[C], t_chunk: f64, t_max: f64, tol: f64) -> Result<Vec<C>>
where
    F: Fn(f64, &[C], &mut [C]),
{
    let opts = IntegratorOptions { rtol: 1e-10, atol: 1e-13, ..Default::default() };
    let mut y = y0.to_vec();
    let mut scratch = vec![C::new(0.0, 0.0); y.len()];
    let mut t = 0.0;
    loop {
        let mut last = y.clone();
        integrate_observe(&rhs, 0.0, &y, &[t_chunk], &opts, |_, _, s| {
            last.copy_from_slice(s);
            Ok(())
        })?;
        y = last;
        t += t_chunk;
        rhs(t, &y, &mut scratch);
        let res = norm2(&scratch) / norm2(&y).max(1e-300);
        if res <= tol {
            return Ok(y);
        }
        if t >= t_max {
            return Err(Error::NoConvergence(format!("steady state not reached by t = {t}: residual {res:.3e}")));
        }
    }
}

/// `||A y|| / ||y||`.
pub fn residual(op: &SparseSuperOp, y: &[C]) -> f64 {
    norm2(&op.matvec(y)) / norm2(y).max(1e-300)
}

/// Quantum regression: propagate `y_b` (the B-modified steady state) and read
/// the A-modified reduced trace at every delay.
pub fn two_time_correlation<F, R>(rhs: F, y_b: &[C], tau_grid: &[f64], opts: &IntegratorOptions, readout: R) -> Result<Vec<C>>
where
    F: Fn(f64, &[C], &mut [C]),
    R: Fn(&[C]) -> Result<C>,
{
    let mut out = vec![C::new(0.0, 0.0); tau_grid.len()];
    integrate_observe(rhs, 0.0, y_b, tau_grid, opts, |k, _, y| {
        out[k] = readout(y)?;
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub zero_pad: usize,
    pub hann: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { zero_pad: 4, hann: false }
    }
}

/// `X(omega) = int_0^T e^{-i omega tau} C(tau) dtau` on the FFT grid (trapezoid
/// end weight at tau = 0), frequencies ascending.
pub fn one_sided_transform(series: &[C], dt: f64, opts: &SpectrumOptions) -> (Vec<f64>, Vec<C>) {
    let n = series.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let m = n * opts.zero_pad.max(1);
    let mut buf = vec![C::new(0.0, 0.0); m];
    for (k, z) in series.iter().enumerate() {
        let mut w = if k == 0 { 0.5 } else { 1.0 };
        if opts.hann {
            w *= 0.5 * (1.0 + (std::f64::consts::PI * k as f64 / n as f64).cos());
        }
        buf[k] = z * (w * dt);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let half = m / 2;
    let mut omega = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for j in 0..m {
        let signed = j as i64 - half as i64;
        omega.push(2.0 * std::f64::consts::PI * signed as f64 / (m as f64 * dt));
        values.push(buf[signed.rem_euclid(m as i64) as usize]);
    }
    (omega, values)
}

/// Real spectrum `2 Re X(omega)`.
pub fn spectrum(series: &[C], dt: f64, opts: &SpectrumOptions) -> (Vec<f64>, Vec<f64>) {
    let peak = series.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(last) = series.last() {
        if last.norm() > 1e-3 * peak {
            log::warn!("correlation has not decayed by the window end ({:.2e} of peak)", last.norm() / peak);
        }
    }
    let (omega, x) = one_sided_transform(series, dt, opts);
    (omega, x.iter().map(|z| 2.0 * z.re).collect())
}

pub fn spectrum_table(omega: &[f64], s: &[f64]) -> Table {
    let mut t = Table::new(&["omega", "S"]).with_meta("omega_unit", "rad/ps");
    for (w, v) in omega.iter().zip(s) {
        t.push(vec![*w, *v]);
    }
    t
}

/// Local maxima above `rel` of the global maximum, as `(omega, value)`.
pub fn find_peaks(omega: &[f64], s: &[f64], rel: f64) -> Vec<(f64, f64)> {
    let top = s.iter().copied().fold(f64::MIN, f64::max);
    (1..s.len().saturating_sub(1))
        .filter(|&k| s[k] > s[k - 1] && s[k] >= s[k + 1] && s[k] >= rel * top)
        .map(|k| (omega[k], s[k]))
        .collect()
}

/// Deepest dip of `s` inside `center +- half_width`, as `1 - s_min / s_peak`
/// with `s_peak` the lower of the two maxima flanking the dip. `None` when
/// the window holds no interior minimum.
pub fn fringe_contrast(omega: &[f64], s: &[f64], center: f64, half_width: f64) -> Option<f64> {
    let n = s.len();
    let mut best: Option<f64> = None;
    for k in 1..n.saturating_sub(1) {
        if (omega[k] - center).abs() > half_width || !(s[k] < s[k - 1] && s[k] <= s[k + 1]) {
            continue;
        }
        let climb = |range: &mut dyn Iterator<Item = usize>| {
            let mut top = s[k];
            for j in range {
                if s[j] < top {
                    break;
                }
                top = s[j];
            }
            top
        };
        let left = climb(&mut (0..k).rev());
        let right = climb(&mut (k + 1..n));
        let peak = left.min(right);
        if peak > 0.0 {
            let c = 1.0 - s[k] / peak;
            best = Some(best.map_or(c, |b: f64| b.max(c)));
        }
    }
    best
}

#[cfg(test)]
mod tests;
