//! Two cavities side-coupled to a waveguide, seen from the emitters as a bath.
//!
//! Frequencies are rad/ps, times ps, lengths nm. Poles `s` live in the frame
//! rotating at `omega_0`; correlation terms are emitted in the lab frame,
//! `Omega = omega_0 - Im s`, `Gamma = -Re s`.

use crate::corrlib::{
    adjoint_table, fit_exponentials_with, time_reverse_close, CorrelationKey, CorrelationSet,
    ExpTerm, FitOptions,
};
use crate::csvio::Table;
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::oracle::delay_ode_correlations;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SPEED_OF_LIGHT: f64 = 299_792.458;

/// Cavity field labels used in emitted correlation sets.
pub const CAVITY: [&str; 2] = ["c1", "c2"];
pub const CAVITY_DAG: [&str; 2] = ["c1d", "c2d"];

pub fn omega_from_wavelength(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda_nm
}

const MERGE_RADIUS: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-12;
const ROOT_ACCEPT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideParams {
    pub lambda_c1: f64,
    pub lambda_c2: f64,
    pub lambda_e1: f64,
    pub lambda_e2: f64,
    pub q1: f64,
    pub q2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_i1: f64,
    pub kappa_i2: f64,
    pub v1: f64,
    pub v2: f64,
    pub x_d: f64,
    pub v_g: f64,
    pub omega_0: f64,
}

impl WaveguideParams {
    /// Resonant emitters and cavities at 945 nm, Q = 1000, separated by
    /// `x_d_over_lambda0` wavelengths.
    pub fn resonant_pair(x_d_over_lambda0: f64) -> Self {
        Self::from_wavelengths([945.0, 945.0], [945.0, 945.0], [1000.0, 1000.0], x_d_over_lambda0)
    }

    /// Detuned pair: cavities at 945.0 and 945.76 nm, emitters at 944.62 and 945.38 nm.
    pub fn detuned_pair(x_d_over_lambda0: f64) -> Self {
        Self::from_wavelengths([945.0, 945.76], [944.62, 945.38], [1000.0, 1000.0], x_d_over_lambda0)
    }

    /// Fills the derived defaults: `kappa = omega_c / Q`, `kappa_i = kappa / 20`,
    /// `V1 = kappa1 / 10`, `V2 = kappa2 / 5`, `v_g = c`, `omega_0 = omega_c1`.
    pub fn from_wavelengths(cavity: [f64; 2], emitter: [f64; 2], q: [f64; 2], x_d_over_lambda0: f64) -> Self {
        let w1 = omega_from_wavelength(cavity[0]);
        let w2 = omega_from_wavelength(cavity[1]);
        let kappa1 = w1 / q[0];
        let kappa2 = w2 / q[1];
        let mut p = Self {
            lambda_c1: cavity[0],
            lambda_c2: cavity[1],
            lambda_e1: emitter[0],
            lambda_e2: emitter[1],
            q1: q[0],
            q2: q[1],
            kappa1,
            kappa2,
            kappa_i1: kappa1 / 20.0,
            kappa_i2: kappa2 / 20.0,
            v1: kappa1 / 10.0,
            v2: kappa2 / 5.0,
            x_d: 0.0,
            v_g: SPEED_OF_LIGHT,
            omega_0: w1,
        };
        p.x_d = x_d_over_lambda0 * p.lambda_0();
        p
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.kappa1, self.kappa2, self.kappa_i1, self.kappa_i2, self.x_d];
        if rates.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("rates and x_d must be finite and non-negative".into()));
        }
        let positive = [self.lambda_c1, self.lambda_c2, self.lambda_e1, self.lambda_e2, self.v_g, self.omega_0];
        if positive.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Config("wavelengths, v_g and omega_0 must be positive".into()));
        }
        if !(self.v1.is_finite() && self.v2.is_finite()) {
            return Err(Error::Config("couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn omega_c(&self, n: usize) -> f64 {
        omega_from_wavelength([self.lambda_c1, self.lambda_c2][n])
    }

    pub fn omega_e(&self, n: usize) -> f64 {
        omega_from_wavelength([self.lambda_e1, self.lambda_e2][n])
    }

    pub fn kappa(&self, n: usize) -> f64 {
        [self.kappa1, self.kappa2][n]
    }

    pub fn kappa_i(&self, n: usize) -> f64 {
        [self.kappa_i1, self.kappa_i2][n]
    }

    pub fn coupling(&self, n: usize) -> f64 {
        [self.v1, self.v2][n]
    }

    /// Wavelength at the reference frequency.
    pub fn lambda_0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.v_g / self.omega_0
    }

    pub fn t_d(&self) -> f64 {
        self.x_d / self.v_g
    }

    /// Propagation phase `omega_0 t_d`.
    pub fn theta(&self) -> f64 {
        self.omega_0 * self.t_d()
    }

    /// `i (omega_c,n - omega_0) + (kappa_n + kappa_i,n) / 2`.
    pub fn delta(&self, n: usize) -> Complex64 {
        c(0.5 * (self.kappa(n) + self.kappa_i(n)), self.omega_c(n) - self.omega_0)
    }

    pub fn max_rate(&self) -> f64 {
        [
            self.delta(0).norm(),
            self.delta(1).norm(),
            self.v1.abs(),
            self.v2.abs(),
            (self.omega_e(0) - self.omega_0).abs(),
            (self.omega_e(1) - self.omega_0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn cross_amplitude(&self) -> Complex64 {
        0.25 * self.kappa1 * self.kappa2 * Complex64::from_polar(1.0, 2.0 * self.theta())
    }
}

/// Closed-form roots of the delay-free quadratic.
pub fn case1_poles(p: &WaveguideParams) -> (Complex64, Complex64) {
    let (d1, d2) = (p.delta(0), p.delta(1));
    let disc = (d1 - d2) * (d1 - d2) + 4.0 * p.cross_amplitude();
    let root = disc.sqrt();
    (-(d1 + d2) * 0.5 + root * 0.5, -(d1 + d2) * 0.5 - root * 0.5)
}

/// Case I correlations `<c_n(t) c_m^dag(0)>` with their time-reversed partners.
pub fn case1_correlations(p: &WaveguideParams) -> Result<CorrelationSet> {
    let (s1, s2) = case1_poles(p);
    if (s1 - s2).norm() <= 1e-12 * s1.norm().max(1.0) {
        return Err(Error::DegeneratePole(format!(
            "Case I roots coincide at s = {s1}; perturb the parameters by ~1e-9 relative"
        )));
    }
    let roots = [s1, s2];
    let cross = -0.5 * (p.kappa1 * p.kappa2).sqrt() * Complex64::from_polar(1.0, p.theta());
    let mut set = CorrelationSet::new();
    for n in 0..2 {
        for m in 0..2 {
            let terms = (0..2)
                .map(|k| {
                    let (sk, so) = (roots[k], roots[1 - k]);
                    let num = if n == m { sk + p.delta(1 - n) } else { cross };
                    lab_term(p, num / (sk - so), sk)
                })
                .collect();
            set.insert(CorrelationKey::positive(CAVITY[n], CAVITY_DAG[m]), terms);
        }
    }
    close_cavity_set(&set)
}

fn lab_term(p: &WaveguideParams, w: Complex64, s: Complex64) -> ExpTerm {
    ExpTerm::new(w, p.omega_0 - s.im, -s.re)
}

pub fn cavity_adjoints() -> impl Fn(&str) -> Option<String> {
    adjoint_table(&[(CAVITY[0], CAVITY_DAG[0]), (CAVITY[1], CAVITY_DAG[1])])
}

fn close_cavity_set(set: &CorrelationSet) -> Result<CorrelationSet> {
    time_reverse_close(set, cavity_adjoints())
}

#[allow(non_snake_case)]
pub fn transcendental_F(p: &WaveguideParams, s: Complex64) -> Complex64 {
    (s + p.delta(0)) * (s + p.delta(1)) - p.cross_amplitude() * (-2.0 * s * p.t_d()).exp()
}

#[allow(non_snake_case)]
pub fn transcendental_F_prime(p: &WaveguideParams, s: Complex64) -> Complex64 {
    let td = p.t_d();
    (s + p.delta(0)) + (s + p.delta(1)) + 2.0 * td * p.cross_amplitude() * (-2.0 * s * td).exp()
}

/// Scale against which root residuals `|F(s)|` are judged.
pub fn residual_scale(s: Complex64) -> f64 {
    s.norm_sqr().max(1.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub roots: Vec<Complex64>,
    /// `(n, m)` with 1-based cavity indices: weights of `<c_n(t) c_m^dag(0)>`.
    pub residue_weights: BTreeMap<(usize, usize), Vec<Complex64>>,
}

impl PoleSet {
    pub fn roots_table(&self) -> Table {
        let mut t = Table::new(&["re_s", "im_s"]);
        for s in &self.roots {
            t.push(vec![s.re, s.im]);
        }
        t
    }

    pub fn weights_table(&self, n: usize, m: usize) -> Option<Table> {
        let w = self.residue_weights.get(&(n, m))?;
        let mut t = Table::new(&["re_s", "im_s", "re_w", "im_w"]);
        for (s, w) in self.roots.iter().zip(w) {
            t.push(vec![s.re, s.im, w.re, w.im]);
        }
        Some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleWindow {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub grid: (usize, usize),
}

impl PoleWindow {
    /// `-0.45 <= Re s <= 0.45`, `-3 <= Im s <= 3`, both in units of `kappa1`.
    pub fn compact(p: &WaveguideParams) -> Self {
        let k = p.kappa1.max(p.kappa2);
        Self { re_range: (-0.45 * k, 0.45 * k), im_range: (-3.0 * k, 3.0 * k), grid: (400, 400) }
    }

    /// A window wide enough to hold about `n` roots of the delay ladder.
    pub fn for_count(p: &WaveguideParams, n: usize) -> Self {
        let td = p.t_d().max(1e-300);
        let spacing = std::f64::consts::PI / td;
        let centre = -0.5 * (p.delta(0).im + p.delta(1).im);
        let half = (n as f64 / 2.0 + 2.0) * spacing + p.max_rate();
        let kk = (p.kappa1 * p.kappa2).max(1e-300);
        let far = (4.0 * (half * half + p.max_rate().powi(2)) / kk).ln().max(0.0) / (2.0 * td);
        let deepest = far + p.delta(0).re.max(p.delta(1).re) + 0.5;
        let re_range = (-deepest, 0.05 * p.kappa1.max(p.kappa2).max(1e-3));
        let rows = ((2.0 * half / (spacing / 12.0)).ceil() as usize).max(64);
        let cols = (((re_range.1 - re_range.0) / 0.01).ceil() as usize).clamp(64, 400);
        Self { re_range, im_range: (centre - half, centre + half), grid: (cols, rows) }
    }
}

/// `log10 |F|` on the window grid, rows ordered by Im then Re.
pub fn log_abs_f_grid(p: &WaveguideParams, window: &PoleWindow) -> Vec<(f64, f64, f64)> {
    let (nx, ny) = window.grid;
    let (re0, re1) = window.re_range;
    let (im0, im1) = window.im_range;
    (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let im = im0 + (im1 - im0) * j as f64 / (ny - 1) as f64;
            (0..nx).map(move |i| {
                let re = re0 + (re1 - re0) * i as f64 / (nx - 1) as f64;
                (re, im, transcendental_F(p, c(re, im)).norm().log10())
            })
        })
        .collect()
}

fn newton(p: &WaveguideParams, mut s: Complex64) -> Option<Complex64> {
    for _ in 0..100 {
        let f = transcendental_F(p, s);
        if f.norm() <= NEWTON_TOL * residual_scale(s) {
            return Some(polish(p, s));
        }
        let df = transcendental_F_prime(p, s);
        if df.norm() == 0.0 {
            return None;
        }
        let step = f / df;
        s -= step;
        if !(s.re.is_finite() && s.im.is_finite()) {
            return None;
        }
        if step.norm() <= 1e-15 * s.norm().max(1.0) {
            break;
        }
    }
    (transcendental_F(p, s).norm() <= ROOT_ACCEPT * residual_scale(s)).then_some(s)
}

fn polish(p: &WaveguideParams, mut s: Complex64) -> Complex64 {
    for _ in 0..2 {
        let next = s - transcendental_F(p, s) / transcendental_F_prime(p, s);
        if transcendental_F(p, next).norm() >= transcendental_F(p, s).norm() {
            break;
        }
        s = next;
    }
    s
}

/// Roots of `F` inside the window: grid minima of `|F|` polished by Newton.
pub fn find_poles(p: &WaveguideParams, window: &PoleWindow) -> Result<PoleSet> {
    let (nx, ny) = window.grid;
    if nx < 32 || ny < 32 {
        return Err(Error::Config("pole search grid must be at least 32x32".into()));
    }
    let vals = log_abs_f_grid(p, window);
    let at = |i: usize, j: usize| vals[j * nx + i].2;
    let mut candidates = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = at(i, j);
            let mut is_min = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    if at(ii as usize, jj as usize) < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                candidates.push(c(vals[j * nx + i].0, vals[j * nx + i].1));
            }
        }
    }
    let polished: Vec<Option<Complex64>> = candidates.par_iter().map(|&s| newton(p, s)).collect();
    let (dx, dy) = (
        (window.re_range.1 - window.re_range.0) / (nx - 1) as f64,
        (window.im_range.1 - window.im_range.0) / (ny - 1) as f64,
    );
    let mut roots: Vec<Complex64> = Vec::new();
    for (start, root) in candidates.iter().zip(polished) {
        let Some(s) = root else {
            log::debug!("Newton from {start} did not converge; candidate dropped");
            continue;
        };
        let inside = s.re >= window.re_range.0 - dx
            && s.re <= window.re_range.1 + dx
            && s.im >= window.im_range.0 - dy
            && s.im <= window.im_range.1 + dy;
        if inside && roots.iter().all(|r| (r - s).norm() > MERGE_RADIUS) {
            roots.push(s);
        }
    }
    sort_roots(&mut roots);
    Ok(PoleSet { roots, residue_weights: BTreeMap::new() })
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
}

/// The `n` roots closest to the ladder centre in Im s.
pub fn find_n_poles(p: &WaveguideParams, n: usize) -> Result<PoleSet> {
    let window = PoleWindow::for_count(p, n);
    let mut set = find_poles(p, &window)?;
    if set.roots.len() < n {
        return Err(Error::NoConvergence(format!(
            "pole search found {} roots, {} requested",
            set.roots.len(),
            n
        )));
    }
    let centre = -0.5 * (p.delta(0).im + p.delta(1).im);
    set.roots.sort_by(|a, b| (a.im - centre).abs().total_cmp(&(b.im - centre).abs()).then(a.re.total_cmp(&b.re)));
    set.roots.truncate(n);
    sort_roots(&mut set.roots);
    Ok(set)
}

/// Residue weights `N(s_k) / F'(s_k)` for each initially excited cavity in `inits` (1-based).
pub fn residues(p: &WaveguideParams, roots: &[Complex64], inits: &[usize]) -> Result<PoleSet> {
    let cross_amp = -0.5 * (p.kappa1 * p.kappa2).sqrt() * Complex64::from_polar(1.0, p.theta());
    let mut weights = BTreeMap::new();
    let derivs: Vec<Complex64> = roots.iter().map(|&s| transcendental_F_prime(p, s)).collect();
    for (&s, d) in roots.iter().zip(&derivs) {
        if d.norm() <= 1e-10 * s.norm().max(1.0) {
            return Err(Error::DegeneratePole(format!("F'(s) vanishes at the root s = {s}")));
        }
    }
    for &m in inits {
        if m != 1 && m != 2 {
            return Err(Error::Config(format!("cavity index {m} out of range")));
        }
        for n in 1..=2 {
            let w: Vec<Complex64> = roots
                .iter()
                .zip(&derivs)
                .map(|(&s, &d)| {
                    let num = if n == m {
                        s + p.delta(2 - n)
                    } else {
                        cross_amp * (-s * p.t_d()).exp()
                    };
                    num / d
                })
                .collect();
            weights.insert((n, m), w);
        }
    }
    Ok(PoleSet { roots: roots.to_vec(), residue_weights: weights })
}

#[derive(Debug, Clone)]
pub struct Case2Options {
    pub n_self_terms: usize,
    pub fit_samples: usize,
    /// Fit window; `None` runs until `|C| <= 1e-4 |C(0)|`, capped at `window_cap_td * t_d`.
    pub fit_window: Option<f64>,
    pub window_cap_td: f64,
    /// Fit residual relative to `|C(0)|`.
    pub fit_tolerance: f64,
}

impl Default for Case2Options {
    fn default() -> Self {
        Self { n_self_terms: 18, fit_samples: 2048, fit_window: None, window_cap_td: 40.0, fit_tolerance: 1e-3 }
    }
}

/// Fit window for the self-correlations.
pub fn self_fit_window(p: &WaveguideParams, opts: &Case2Options) -> f64 {
    if let Some(t) = opts.fit_window {
        return t;
    }
    let td = p.t_d();
    let cap = (opts.window_cap_td * td).max(40.0 / p.kappa1.max(p.kappa2).max(1e-12));
    // Slowest possible decay: the passive bath loses at least the intrinsic rate.
    let slow = 0.5 * p.kappa_i1.min(p.kappa_i2);
    if slow > 0.0 {
        (4.0 * std::f64::consts::LN_10 / slow).min(cap)
    } else {
        cap
    }
}

/// Fitted self-correlation terms for one cavity (0-based), lab frame.
pub fn fit_self_correlation(p: &WaveguideParams, n: usize, opts: &Case2Options) -> Result<(Vec<ExpTerm>, f64)> {
    let window = self_fit_window(p, opts);
    let dt = window / (opts.fit_samples - 1) as f64;
    let series = delay_ode_correlations(p, dt, opts.fit_samples);
    let samples = series.samples(n, n);
    let scale = samples[0].1.norm();
    let fit = fit_exponentials_with(&samples, &FitOptions::new(opts.n_self_terms, opts.fit_tolerance * scale))?;
    let terms = fit
        .terms
        .into_iter()
        .map(|t| ExpTerm { omega: t.omega + p.omega_0, ..t })
        .collect();
    Ok((terms, fit.residual / scale))
}

pub fn case2_correlations(p: &WaveguideParams, poles: &PoleSet, n_self_fit_terms: usize) -> Result<CorrelationSet> {
    let opts = Case2Options { n_self_terms: n_self_fit_terms, ..Default::default() };
    case2_correlations_with(p, poles, &opts)
}

pub fn case2_correlations_with(p: &WaveguideParams, poles: &PoleSet, opts: &Case2Options) -> Result<CorrelationSet> {
    let needs: Vec<usize> = [1usize, 2]
        .into_iter()
        .filter(|m| !poles.residue_weights.contains_key(&(3 - m, *m)))
        .collect();
    let full = if needs.is_empty() { poles.clone() } else { residues(p, &poles.roots, &[1, 2])? };
    let mut set = CorrelationSet::new();
    for (n, m) in [(1usize, 2usize), (2, 1)] {
        let w = &full.residue_weights[&(n, m)];
        let terms = full.roots.iter().zip(w).map(|(&s, &w)| lab_term(p, w, s)).collect();
        set.insert(CorrelationKey::positive(CAVITY[n - 1], CAVITY_DAG[m - 1]), terms);
    }
    for n in 0..2 {
        let (terms, _) = fit_self_correlation(p, n, opts)?;
        set.insert(CorrelationKey::positive(CAVITY[n], CAVITY_DAG[n]), terms);
    }
    close_cavity_set(&set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resonant_lossless() -> WaveguideParams {
        let mut p = WaveguideParams::resonant_pair(4.0);
        p.kappa_i1 = 0.0;
        p.kappa_i2 = 0.0;
        p
    }

    #[test]
    fn symmetric_resonant_roots() {
        let p = resonant_lossless();
        let (s1, s2) = case1_poles(&p);
        assert!(s1.norm() < 1e-12, "{s1}");
        assert!((s2 + p.kappa1).norm() < 1e-12, "{s2}");
    }

    #[test]
    fn decoupled_roots() {
        let mut p = WaveguideParams::from_wavelengths([945.0, 945.5], [945.0, 945.0], [1000.0, 1000.0], 4.0);
        p.kappa2 = 0.0;
        let (s1, s2) = case1_poles(&p);
        let mut got = [s1, s2];
        got.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((got[0] + p.delta(0)).norm() < 1e-12);
        assert!((got[1] + p.delta(1)).norm() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one_and_cross_weights_agree() {
        let p = WaveguideParams::resonant_pair(4.0);
        let set = case1_correlations(&p).unwrap();
        let w11: Complex64 = set.get(&CorrelationKey::positive("c1", "c1d")).unwrap().iter().map(|t| t.w).sum();
        assert!((w11 - 1.0).norm() < 1e-12);
        let a = set.get(&CorrelationKey::positive("c1", "c2d")).unwrap();
        let b = set.get(&CorrelationKey::positive("c2", "c1d")).unwrap();
        for k in 0..2 {
            assert!((a[k].w - b[k].w).norm() < 1e-15);
        }
    }

    #[test]
    fn degenerate_roots_rejected() {
        // Zero phase and d1 - d2 = i kappa make the discriminant vanish.
        let mut p = resonant_lossless();
        p.x_d = 0.0;
        p.omega_0 = p.omega_c(1);
        p.lambda_c1 = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (p.omega_c(1) + p.kappa2);
        p.kappa1 = p.kappa2;
        let (s1, s2) = case1_poles(&p);
        assert!((s1 - s2).norm() < 1e-6, "{s1} {s2}");
        let mut q = p;
        q.kappa1 = p.kappa1 * (1.0 + 1e-9);
        assert!(case1_correlations(&q).is_ok());
    }

    #[test]
    fn f_vanishes_at_case1_roots_without_delay() {
        let mut p = WaveguideParams::resonant_pair(4.0);
        p.x_d = 0.0;
        let (s1, s2) = case1_poles(&p);
        assert!(transcendental_F(&p, s1).norm() < 1e-12);
        assert!(transcendental_F(&p, s2).norm() < 1e-12);
    }

    #[test]
    fn small_delay_gives_case1_roots() {
        let mut p = WaveguideParams::resonant_pair(4.0);
        p.x_d = 1e-3 / p.kappa1 * p.v_g;
        let poles = find_poles(&p, &PoleWindow { re_range: (-1.5 * p.kappa1, 0.45 * p.kappa1), im_range: (-3.0 * p.kappa1, 3.0 * p.kappa1), grid: (200, 200) }).unwrap();
        assert_eq!(poles.roots.len(), 2, "{:?}", poles.roots);
        // The Case I roots use exp(-2 s t_d) ~ 1; at kappa t_d = 1e-3 they shift by O(kappa^2 t_d).
        let (s1, s2) = case1_poles(&p);
        for r in &poles.roots {
            let d = (r - s1).norm().min((r - s2).norm());
            assert!(d < 5e-3 * p.kappa1, "{r} vs {s1}, {s2}");
        }
    }

    #[test]
    fn single_cavity_residue() {
        let mut p = WaveguideParams::resonant_pair(1500.0);
        p.kappa2 = 0.0;
        let k = p.kappa1;
        let window = PoleWindow { re_range: (-1.5 * k, 0.45 * k), im_range: (-3.0 * k, 3.0 * k), grid: (200, 200) };
        let poles = find_poles(&p, &window).unwrap();
        assert_eq!(poles.roots.len(), 2);
        let set = residues(&p, &poles.roots, &[1]).unwrap();
        let w11 = &set.residue_weights[&(1, 1)];
        let total: Complex64 = w11.iter().sum();
        assert!((total - 1.0).norm() < 1e-10);
        let nonzero = w11.iter().filter(|w| w.norm() > 1e-12).count();
        assert_eq!(nonzero, 1);
    }
}
