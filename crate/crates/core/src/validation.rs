//! The acceptance suite: each criterion runs its scenario against an
//! independent reference and reports named checks.

use crate::corrlib::{adjoint_table, time_reverse_close, CorrelationKey, CorrelationSet, ExpTerm};
use crate::dynamics::{
    fringe_contrast, find_peaks, integrate, integrate_fixed, integrate_observe, uniform_grid, Engine, IntegratorOptions, Observable,
    Propagator,
};
use crate::error::{Error, Result};
use crate::heom::{conjugate_partners, conjugation_defect, enumerate_ados, AdoIndex, HeomState, TierCap};
use crate::linalg::{c, hermiticity_defect, max_abs, sigma_x, sigma_z, CMat};
use crate::liouville::{assemble_conventional_pm, extract_rho_s};
use crate::modelgen::{build_system_model, ModelSpec, SystemSpec};
use crate::oracle::{finite_a_sweep, single_excitation_schrodinger, two_excitation_unitary, DiscreteBath, RECURRENCE_FRACTION};
use crate::scenario::{
    case1_lindblad_trajectory, default_frame, emission_spectrum, emitter_population, emitter_state, simulate_emitters, single_mode_model, EmitterModel, COUPLING,
    COUPLING_DAG,
};
use crate::waveguide::{
    case1_correlations, case1_poles, case2_correlations_with, find_n_poles, fit_self_correlation, residual_scale, residues,
    transcendental_F, Case2Options, WaveguideParams, CAVITY, CAVITY_DAG,
};
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

type C = Complex64;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable bound, e.g. `<= 1e-8`; empty for informational values.
    pub bound: String,
    pub passed: bool,
    pub informational: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound: format!("<= {bound:e}"), passed: value <= bound, informational: false }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound: format!(">= {bound:e}"), passed: value >= bound, informational: false }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, bound: "true".into(), passed: ok, informational: false }
    }

    pub fn equals(name: &str, value: usize, expected: usize) -> Self {
        Self { name: name.into(), value: value as f64, bound: format!("== {expected}"), passed: value == expected, informational: false }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Self { name: name.into(), value, bound: String::new(), passed: true, informational: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub error: Option<String>,
    pub passed: bool,
}

impl CriterionReport {
    /// One line: verdict, id, title, failing (or all) checks, runtime.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut parts: Vec<String> = self
            .checks
            .iter()
            .map(|k| {
                let mark = if k.informational { "i" } else if k.passed { "ok" } else { "FAIL" };
                if k.bound.is_empty() {
                    format!("{}={:.4e} [{mark}]", k.name, k.value)
                } else {
                    format!("{}={:.4e} {} [{mark}]", k.name, k.value, k.bound)
                }
            })
            .collect();
        if let Some(e) = &self.error {
            parts.push(format!("error: {e}"));
        }
        format!(
            "{verdict} criterion {:>2} {}: {} ({:.1} s of {:.0} s)",
            self.id,
            self.title,
            parts.join("; "),
            self.seconds,
            self.budget_seconds
        )
    }
}

/// `(id, title, runtime budget in seconds)`.
pub const CRITERIA: [(usize, &str, f64); 11] = [
    (1, "purification equivalence", 10.0),
    (2, "free-pole tiered equivalence", 10.0),
    (3, "finite-a convergence", 30.0),
    (4, "Case I bath", 60.0),
    (5, "Case II bath", 300.0),
    (6, "mode-count audit", 60.0),
    (7, "resonant two-emitter dynamics", 120.0),
    (8, "retardation and two excitations", 600.0),
    (9, "single-photon input", 120.0),
    (10, "pumped emission spectrum", 600.0),
    (11, "property suites", 600.0),
];

pub fn run_criterion(id: usize) -> Result<CriterionReport> {
    let &(_, title, budget) = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| Error::Config(format!("no acceptance criterion {id}")))?;
    let start = Instant::now();
    let outcome = match id {
        1 => purification_equivalence(),
        2 => tiered_equivalence(),
        3 => finite_a_convergence(),
        4 => case1_bath(),
        5 => case2_bath(),
        6 => mode_count_audit(),
        7 => resonant_dynamics(),
        8 => retardation(),
        9 => photon_input(),
        10 => pumped_spectrum(),
        _ => property_suites(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut checks, error) = match outcome {
        Ok(checks) => (checks, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    checks.push(Check::at_most("runtime_s", seconds, budget));
    let passed = error.is_none() && checks.iter().all(|k| k.passed);
    Ok(CriterionReport { id, title: title.into(), checks, seconds, budget_seconds: budget, error, passed })
}

pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().map(|c| run_criterion(c.0).expect("listed criterion")).collect()
}

fn tight() -> IntegratorOptions {
    IntegratorOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() }
}

/// Reduced states along `grid` for a linear right-hand side.
fn reduced_series<F, E>(rhs: F, y0: &[C], grid: &[f64], opts: &IntegratorOptions, extract: E) -> Result<Vec<CMat>>
where
    F: Fn(f64, &[C], &mut [C]),
    E: Fn(&[C]) -> Result<CMat>,
{
    let mut out = Vec::with_capacity(grid.len());
    integrate_observe(rhs, grid[0], y0, grid, opts, |_, _, y| {
        out.push(extract(y)?);
        Ok(())
    })?;
    Ok(out)
}

fn sup_deviation(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_abs(&(x - y))).fold(0.0, f64::max)
}

fn excited_qubit() -> CMat {
    let mut rho = CMat::zeros(2, 2);
    rho[(1, 1)] = c(1.0, 0.0);
    rho
}

// Qubit test model: H_S = sigma_z / 2, S = sigma_x, lambda = 0.2, Omega = 1, Gamma = 0.3.
const QUBIT: (f64, f64, f64) = (1.0, 0.3, 0.2);

fn qubit_h() -> CMat {
    sigma_z() * c(0.5, 0.0)
}

fn purification_equivalence() -> Result<Vec<Check>> {
    let (omega, gamma, lambda) = QUBIT;
    let n_max = 8;
    let rho0 = excited_qubit();
    let mut model = single_mode_model(&qubit_h(), &sigma_x(), omega, gamma, lambda)?;
    model.set_initial_rho(rho0.clone());
    let grid = uniform_grid(10.0 / gamma, 201);
    let prop = Propagator::new(&model, Engine::Dense { n_max, cap: None })?;
    let purified = reduced_series(prop.rhs(), prop.initial(), &grid, &tight(), |y| prop.rho_s(y))?;
    let (layout, op) = assemble_conventional_pm(&qubit_h(), &sigma_x(), omega, gamma, lambda, n_max)?;
    let y0 = layout.embed_vacuum(&rho0)?;
    let conventional = reduced_series(crate::dynamics::sparse_rhs(&op), &y0, &grid, &tight(), |y| extract_rho_s(&layout, y))?;
    Ok(vec![Check::at_most("sup_rho_deviation", sup_deviation(&purified, &conventional), 1e-8)])
}

/// Two-exponential bath on the qubit test model.
fn two_exponential_model() -> Result<ModelSpec> {
    let (omega, gamma, lambda) = QUBIT;
    let sys = SystemSpec::new(qubit_h()).with_coupling("X", sigma_x(), "X");
    let mut set = CorrelationSet::new();
    set.insert(
        CorrelationKey::positive("X", "X"),
        vec![ExpTerm::new(c(lambda * lambda, 0.0), omega, gamma), ExpTerm::new(c(0.01, 0.02), -0.5, 0.8)],
    );
    let set = time_reverse_close(&set, |l| Some(l.to_string()))?;
    let mut model = build_system_model(&set, &sys)?;
    model.set_initial_rho(excited_qubit());
    Ok(model)
}

fn tiered_equivalence() -> Result<Vec<Check>> {
    let model = two_exponential_model()?;
    let level = 4;
    let dense = Propagator::new(&model, Engine::Dense { n_max: level, cap: Some(level) })?;
    let tiered = Propagator::new(&model, Engine::Tiered { cap: TierCap::total(level) })?;
    // Map dense (system-major) vectors to ADO-major storage for an entrywise comparison.
    let (layout, _) = crate::liouville::assemble_purified_uniform(&model, level, Some(level))?;
    let index = AdoIndex::for_model(&model, TierCap::total(level))?;
    let occ = layout.occupations().ok_or_else(|| Error::Assembly("dense layout is not purified".into()))?;
    let d = model.dim();
    let to_tiered = |v: &[C]| -> Result<Vec<C>> {
        let n_occ = occ.len();
        let mut out = vec![C::new(0.0, 0.0); index.len() * d * d];
        for (o, key) in occ.iter().enumerate() {
            let k = index.index_of(key).ok_or_else(|| Error::Assembly("occupation missing from the ADO index".into()))?;
            for s in 0..d * d {
                out[k * d * d + s] = v[s * n_occ + o];
            }
        }
        Ok(out)
    };
    let v: Vec<C> = (0..dense.dim()).map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
    let mut a = vec![C::new(0.0, 0.0); v.len()];
    dense.apply(&v, &mut a);
    let a = to_tiered(&a)?;
    let vt = to_tiered(&v)?;
    let mut b = vec![C::new(0.0, 0.0); vt.len()];
    tiered.apply(&vt, &mut b);
    let rhs_dev = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let grid = uniform_grid(10.0 / QUBIT.1, 201);
    let sa = reduced_series(dense.rhs(), dense.initial(), &grid, &tight(), |y| dense.rho_s(y))?;
    let sb = reduced_series(tiered.rhs(), tiered.initial(), &grid, &tight(), |y| tiered.rho_s(y))?;
    Ok(vec![
        Check::at_most("rhs_entrywise", rhs_dev, 1e-10),
        Check::at_most("trajectory_sup", sup_deviation(&sa, &sb), 1e-10),
    ])
}

fn finite_a_convergence() -> Result<Vec<Check>> {
    let (omega, gamma, lambda) = QUBIT;
    let a_list = [10.0 * gamma, 30.0 * gamma, 100.0 * gamma];
    let grid = uniform_grid(5.0 / gamma, 101);
    let sweep = finite_a_sweep(&qubit_h(), &sigma_x(), &excited_qubit(), omega, gamma, lambda, &a_list, 4, &grid)?;
    let dev = &sweep.deviation;
    let mut checks = vec![
        Check::info("deviation_a10", dev[0]),
        Check::info("deviation_a30", dev[1]),
        Check::holds("strictly_decreasing", dev.windows(2).all(|w| w[1] < w[0])),
        Check::at_most("deviation_a100", dev[2], 1e-3),
    ];
    // The leftover correlation error is O(lambda^2 / a), so a * deviation levels off.
    checks.push(Check::info("a_times_deviation_a100", a_list[2] * dev[2]));
    checks.push(Check::at_most("hermiticity", sweep.hermiticity.iter().copied().fold(0.0, f64::max), 1e-8));
    Ok(checks)
}

/// Relative sup deviation of the Case I closed form from the discretized
/// waveguide over `[0, t_max]`, worst over the four cavity pairs.
fn case1_vs_discrete(p: &WaveguideParams, t_max: f64, half_width: f64) -> Result<f64> {
    let corr = case1_correlations(p)?;
    let grid = uniform_grid(t_max, 251);
    let k = DiscreteBath::modes_for_window(t_max, half_width);
    let bath = DiscreteBath::new(p, k, half_width)?;
    let oracle = single_excitation_schrodinger(p, &bath, &grid)?.with_phase(p.omega_0);
    let mut worst = 0.0f64;
    for n in 0..2 {
        for m in 0..2 {
            let key = CorrelationKey::positive(CAVITY[n], CAVITY_DAG[m]);
            let reference = &oracle.corr[n][m];
            let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let mut err = 0.0f64;
            for (&t, r) in grid.iter().zip(reference) {
                err = err.max((corr.eval(&key, t)? - r).norm());
            }
            worst = worst.max(err / scale.max(1e-300));
        }
    }
    Ok(worst)
}

fn case1_bath() -> Result<Vec<Check>> {
    // One wavelength apart, lossless: the most Markovian integer phase.
    let mut p = WaveguideParams::resonant_pair(1.0);
    p.kappa_i1 = 0.0;
    p.kappa_i2 = 0.0;
    let kappa = p.kappa1;
    let (s1, s2) = case1_poles(&p);
    let (hi, lo) = if s1.re > s2.re { (s1, s2) } else { (s2, s1) };
    let pole_err = hi.norm().max((lo + kappa).norm());
    let corr = case1_correlations(&p)?;
    let w11 = corr.eval(&CorrelationKey::positive(CAVITY[0], CAVITY_DAG[0]), 0.0)?;
    // Band-edge error of the discretized oracle is about kappa / (pi W); W = 400 kappa.
    let width = 400.0 * kappa;
    let rel = case1_vs_discrete(&p, 5.0 / kappa, width)?;
    let p4 = WaveguideParams::resonant_pair(4.0);
    let rel4 = case1_vs_discrete(&p4, 5.0 / p4.kappa1, 400.0 * p4.kappa1)?;
    Ok(vec![
        Check::at_most("pole_error", pole_err, 1e-12),
        Check::at_most("weight_sum_error", (w11 - 1.0).norm(), 1e-12),
        Check::at_most("oracle_relative_xd1", rel, 1e-2),
        Check::info("oracle_relative_xd4", rel4),
    ])
}

fn case2_bath() -> Result<Vec<Check>> {
    let p = WaveguideParams::resonant_pair(1500.0);
    let td = p.t_d();
    let poles = find_n_poles(&p, 80)?;
    let worst_residual = poles
        .roots
        .iter()
        .map(|&s| transcendental_F(&p, s).norm() / residual_scale(s))
        .fold(0.0, f64::max);
    let max_re = poles.roots.iter().map(|s| s.re).fold(f64::MIN, f64::max);
    let set = residues(&p, &poles.roots, &[2])?;
    let w = &set.residue_weights[&(1, 2)];
    let grid = uniform_grid(3.0 * td, 3001);
    let cross: Vec<f64> = grid
        .iter()
        .map(|&t| poles.roots.iter().zip(w).map(|(&s, &wk)| wk * (s * t).exp()).sum::<C>().norm())
        .collect();
    let peak = cross.iter().copied().fold(0.0, f64::max);
    let early = grid.iter().zip(&cross).filter(|(&t, _)| t < 0.9 * td).map(|(_, &v)| v).fold(0.0, f64::max);
    let opts = Case2Options::default();
    let fit_rel = match fit_self_correlation(&p, 0, &opts) {
        Ok((_, r)) => r,
        Err(Error::FitFailure { residual, tolerance, .. }) => residual / tolerance * opts.fit_tolerance,
        Err(e) => return Err(e),
    };
    Ok(vec![
        Check::equals("roots", poles.roots.len(), 80),
        Check::at_most("root_residual", worst_residual, 1e-9),
        Check::at_most("max_re_root", max_re, 1e-9),
        Check::at_most("early_cross_fraction", early / peak, 0.02),
        Check::at_most("self_fit_residual", fit_rel, 1e-3),
    ])
}

/// Case II correlations with `n_poles` cross poles and the default 18-term self fits.
fn case2_dynamics_correlations(p: &WaveguideParams, n_poles: usize) -> Result<CorrelationSet> {
    let poles = find_n_poles(p, n_poles)?;
    // The 18-term fit plateaus near 4e-3; dynamics runs accept 1e-2.
    case2_correlations_with(p, &poles, &Case2Options { fit_tolerance: 1e-2, ..Default::default() })
}

fn mode_count_audit() -> Result<Vec<Check>> {
    let p = WaveguideParams::resonant_pair(4.0);
    let corr = case1_correlations(&p)?;
    let mut em = EmitterModel::new(&p, &corr, default_frame(&p), emitter_state([true, false]), None)?;
    let base = em.model.modes.len();
    em.add_cavity_photon(0)?;
    let added = em.model.modes.len() - base;
    let far = WaveguideParams::resonant_pair(1500.0);
    let mut checks = vec![Check::equals("modes_xd4", base, 16), Check::equals("input_modes", added, 8)];
    for n_poles in [40, 80] {
        let corr = case2_dynamics_correlations(&far, n_poles)?;
        let em = EmitterModel::new(&far, &corr, default_frame(&far), emitter_state([true, false]), None)?;
        checks.push(Check::info(&format!("modes_xd1500_{n_poles}_poles"), em.model.modes.len() as f64));
    }
    checks.push(Check::info("reference_modes_xd1500", 396.0));
    Ok(checks)
}

/// Twice the time of the first interior minimum, refined by a parabola through
/// the neighbouring samples.
fn exchange_period(t: &[f64], y: &[f64]) -> Option<f64> {
    let k = (1..y.len() - 1).find(|&k| y[k] < y[k - 1] && y[k] <= y[k + 1])?;
    let (a, b, cc) = (y[k - 1], y[k], y[k + 1]);
    let h = t[k] - t[k - 1];
    let denom = a - 2.0 * b + cc;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - cc) / denom } else { 0.0 };
    Some(2.0 * (t[k] + shift * h))
}

/// Single-excitation exact tier caps: one mode quantum on each side.
const SINGLE: TierCap = TierCap { total: 2, right: Some(1), left: Some(1) };

fn resonant_dynamics() -> Result<Vec<Check>> {
    let p = WaveguideParams::resonant_pair(4.0);
    let w = default_frame(&p);
    let corr = case1_correlations(&p)?;
    let em = EmitterModel::new(&p, &corr, w, emitter_state([true, false]), None)?;
    let grid = uniform_grid(20.0, 801);
    let opts = IntegratorOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    let traj = simulate_emitters(&em, Engine::Tiered { cap: SINGLE }, &grid, &opts, false)?;
    let reference = case1_lindblad_trajectory(&p, w, [true, false], 1, &grid, &opts)?;
    let mut dev = 0.0f64;
    for name in ["P_e1", "P_e2"] {
        let a = traj.real(name).unwrap_or_default();
        let b = reference.real(name).unwrap_or_default();
        dev = dev.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    let pa = traj.real("P_e1").unwrap_or_default();
    let pb = reference.real("P_e1").unwrap_or_default();
    let (ta, tb) = match (exchange_period(&grid, &pa), exchange_period(&grid, &pb)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NoConvergence("no population minimum inside the window".into())),
    };
    Ok(vec![
        Check::info("period_ps", ta),
        Check::at_most("period_relative_error", (ta - tb).abs() / tb, 0.02),
        Check::at_most("population_sup_deviation", dev, 0.02),
    ])
}

/// Excitation number of emitter basis state `k`.
fn excitations(k: usize) -> u32 {
    (k as u32).count_ones()
}

fn retardation() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    // Long delay: the second emitter stays dark until the photon arrives.
    let far = WaveguideParams::resonant_pair(1500.0);
    let td = far.t_d();
    let corr = case2_dynamics_correlations(&far, 40)?;
    let em = EmitterModel::new(&far, &corr, default_frame(&far), emitter_state([true, false]), None)?;
    let grid = uniform_grid(2.0 * td, 201);
    let traj = simulate_emitters(&em, Engine::Tiered { cap: SINGLE }, &grid, &IntegratorOptions::default(), false)?;
    let e2 = traj.real("P_e2").unwrap_or_default();
    let early = grid.iter().zip(&e2).filter(|(&t, _)| t < 0.9 * td).map(|(_, &v)| v.abs()).fold(0.0, f64::max);
    checks.push(Check::info("t_d_ps", td));
    checks.push(Check::at_most("e2_before_arrival", early, 1e-3));
    checks.push(Check::at_least("e2_at_two_delays", *e2.last().unwrap_or(&0.0), 1e-2));

    // Two excitations at short delay against the unitary discretized waveguide.
    let p = WaveguideParams::resonant_pair(4.0);
    let t_max = 20.0;
    let grid = uniform_grid(t_max, 81);
    let k = 400;
    let dq = RECURRENCE_FRACTION * 2.0 * std::f64::consts::PI / t_max;
    let bath = DiscreteBath::new(&p, k, 0.25 * k as f64 * dq)?.with_loss_reservoirs(&p, 40);
    let oracle = two_excitation_unitary(&p, &bath, &grid)?;
    let corr = case1_correlations(&p)?;
    let em = EmitterModel::new(&p, &corr, default_frame(&p), emitter_state([true, true]), None)?;
    let opts = IntegratorOptions { rtol: 1e-9, atol: 1e-12, ..Default::default() };
    for level in [2usize, 4] {
        let prop = Propagator::new(&em.model, Engine::Tiered { cap: TierCap::total(level) })?;
        let prop = &prop;
        let mut obs: Vec<(String, Observable)> = Vec::new();
        for n in 0..2 {
            let pn = emitter_population(n);
            obs.push((format!("P_e{}", n + 1), Box::new(move |y| Ok((&pn * prop.rho_s(y)?).trace()))));
        }
        obs.push(("trace".into(), Box::new(|y| Ok(prop.trace(y)))));
        // Coherences between emitter states of different excitation number.
        obs.push((
            "off_sector".into(),
            Box::new(|y| {
                let rho = prop.rho_s(y)?;
                let mut worst = 0.0f64;
                for i in 0..rho.nrows() {
                    for j in 0..rho.ncols() {
                        if excitations(i) != excitations(j) {
                            worst = worst.max(rho[(i, j)].norm());
                        }
                    }
                }
                Ok(C::new(worst, 0.0))
            }),
        ));
        let traj = integrate(prop.rhs(), prop.initial(), &grid, &opts, &obs, false)?;
        let mut dev = 0.0f64;
        for n in 0..2 {
            let a = traj.real(&format!("P_e{}", n + 1)).unwrap_or_default();
            dev = dev.max(a.iter().zip(&oracle[n]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        let drift = traj.real("trace").unwrap_or_default().iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        let off = traj.real("off_sector").unwrap_or_default().iter().copied().fold(0.0, f64::max);
        if level == 2 {
            checks.push(Check::at_most("two_photon_trace_drift", drift, 1e-6));
            checks.push(Check::at_most("two_photon_off_sector", off, 1e-6));
            checks.push(Check::at_most("two_photon_oracle_L2", dev, 3e-2));
        } else {
            checks.push(Check::info(&format!("two_photon_oracle_L{level}"), dev));
        }
    }
    Ok(checks)
}

fn photon_input() -> Result<Vec<Check>> {
    let p = WaveguideParams::detuned_pair(4.0);
    let corr = case1_correlations(&p)?;
    let mut em = EmitterModel::new(&p, &corr, default_frame(&p), emitter_state([false, false]), None)?;
    em.add_cavity_photon(0)?;
    let prop = Propagator::new(&em.model, Engine::Tiered { cap: SINGLE })?;
    let prop = &prop;
    let p1 = emitter_population(0);
    let obs: Vec<(String, Observable)> = vec![
        ("P_e1".into(), Box::new(move |y| Ok((&p1 * prop.rho_s(y)?).trace()))),
        ("trace".into(), Box::new(|y| Ok(prop.trace(y)))),
        ("hermiticity".into(), Box::new(|y| Ok(C::new(hermiticity_defect(&prop.rho_s(y)?), 0.0)))),
    ];
    let grid = uniform_grid(20.0, 401);
    let traj = integrate(prop.rhs(), prop.initial(), &grid, &IntegratorOptions::default(), &obs, false)?;
    let pe = traj.real("P_e1").unwrap_or_default();
    // First half picosecond.
    let head = &pe[..11];
    let rising = head.windows(2).all(|w| w[1] > w[0]);
    let drift = traj.real("trace").unwrap_or_default().iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let herm = traj.real("hermiticity").unwrap_or_default().iter().copied().fold(0.0, f64::max);
    let imag = traj.observable("P_e1").unwrap_or_default().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::at_most("initial_population", pe[0].abs(), 1e-12),
        Check::holds("initial_rise", rising && (pe[2] - pe[1]) / (grid[2] - grid[1]) > 0.0),
        Check::info("peak_population", pe.iter().copied().fold(0.0, f64::max)),
        Check::at_most("trace_drift", drift, 1e-6),
        Check::at_most("hermiticity", herm.max(imag), 1e-6),
    ])
}

/// Emitter line dressed by its coupling-correlation entry `(X, X^dag)`: the
/// bare detuning plus the real part of the self-energy there. `damping` is the
/// emitter coherence decay rate, which softens the bath poles.
fn dressed_line(corr: &CorrelationSet, x: &str, xd: &str, detuning: f64, damping: f64) -> Result<f64> {
    let terms = corr
        .get(&CorrelationKey::positive(x, xd))
        .ok_or_else(|| Error::Config(format!("no entry <{x} {xd}>")))?;
    let sigma: C = terms.iter().map(|t| C::new(0.0, -1.0) * t.w / C::new(t.gamma + damping, t.omega - detuning)).sum();
    Ok(detuning + sigma.re)
}

/// Frequencies (in the correlation's `e^{+i omega tau}` convention) of the
/// `n` heaviest exponentials in a fit of `series`.
fn dominant_lines(tau: &[f64], series: &[C], n_fit: usize, n: usize) -> Result<Vec<f64>> {
    let samples: Vec<(f64, C)> = tau.iter().copied().zip(series.iter().copied()).step_by(4).collect();
    let scale = series.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let fit = match crate::corrlib::fit_exponentials(&samples, n_fit, 1e-3 * scale) {
        Ok(f) => f.terms,
        Err(Error::FitFailure { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let mut terms = fit;
    terms.sort_by(|a, b| b.w.norm().total_cmp(&a.w.norm()));
    Ok(terms.iter().take(n).map(|t| -t.omega).collect())
}

fn pumped_spectrum() -> Result<Vec<Check>> {
    let p = WaveguideParams::detuned_pair(4.0);
    let w = default_frame(&p);
    let corr = case1_correlations(&p)?;
    let (de1, de2) = (p.omega_e(0) - w, p.omega_e(1) - w);
    let engine = Engine::Dense { n_max: 2, cap: Some(2) };
    let (tau_max, n_tau) = (200.0, 4001);
    let mut checks = Vec::new();
    for (tag, pump) in [("default", p.kappa1 / 20.0), ("alt", p.kappa1 / 5.0)] {
        let mut dark = p.clone();
        dark.v2 = 0.0;
        let s0 = emission_spectrum(&dark, &corr, w, pump, 1, engine, tau_max, n_tau)?;
        let s1 = emission_spectrum(&p, &corr, w, pump, 1, engine, tau_max, n_tau)?;
        let dw = s0.omega[1] - s0.omega[0];
        let peaks = find_peaks(&s0.omega, &s0.spectrum, 0.01);
        checks.push(Check::equals(&format!("{tag}_dark_peaks"), peaks.len(), 2));
        let dressed = dressed_line(&crate::scenario::emitter_correlations(&dark, &corr, w), COUPLING[0], COUPLING_DAG[0], de1, 0.5 * pump)?;
        let lines = dominant_lines(&s0.tau, &s0.correlation, 3, 2)?;
        let (emitter, cavity) = if (lines[0] - de1).abs() < (lines[1] - de1).abs() { (lines[0], lines[1]) } else { (lines[1], lines[0]) };
        checks.push(Check::info(&format!("{tag}_emitter_line"), emitter));
        checks.push(Check::at_most(&format!("{tag}_emitter_line_offset"), (emitter - dressed).abs(), dw));
        checks.push(Check::at_most(&format!("{tag}_cavity_line_offset"), cavity.abs(), dw));
        // Interference near the second emitter spans its coupling scale.
        let window = p.v2;
        let fringe = fringe_contrast(&s1.omega, &s1.spectrum, de2, window).unwrap_or(0.0);
        let without = fringe_contrast(&s0.omega, &s0.spectrum, de2, window).unwrap_or(0.0);
        checks.push(Check::at_least(&format!("{tag}_fringe_contrast"), fringe, 0.05));
        checks.push(Check::at_most(&format!("{tag}_dark_fringe_contrast"), without, 0.05));
    }
    Ok(checks)
}

fn closure_error(set: &CorrelationSet, adjoint: &dyn Fn(&str) -> Option<String>, times: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (key, _) in set.positive() {
        let (Some(ad_a), Some(ad_b)) = (adjoint(&key.a), adjoint(&key.b)) else {
            return Err(Error::Config(format!("no adjoints for {key}")));
        };
        let partner = CorrelationKey::negative(&ad_b, &ad_a);
        for &t in times {
            let a = set.eval(key, t)?;
            let b = set.eval(&partner, -t)?;
            worst = worst.max((a.conj() - b).norm() / a.norm().max(1.0));
        }
    }
    Ok(worst)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn property_suites() -> Result<Vec<Check>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(20211);
    let mut checks = Vec::new();
    let times: Vec<f64> = (0..25).map(|k| 0.2 * k as f64).collect();

    // Time-reversal closure on random sets and on an emitted Case I set.
    let adj = adjoint_table(&[("A", "Ad"), ("B", "Bd")]);
    let mut closure = 0.0f64;
    let mut idempotent = true;
    for _ in 0..20 {
        let mut set = CorrelationSet::new();
        for (a, b) in [("A", "Ad"), ("A", "Bd"), ("B", "Ad")] {
            let terms = (0..rng.gen_range(1..4))
                .map(|_| ExpTerm::new(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0)))
                .collect();
            set.insert(CorrelationKey::positive(a, b), terms);
        }
        let closed = time_reverse_close(&set, &adj)?;
        idempotent &= time_reverse_close(&closed, &adj)? == closed;
        closure = closure.max(closure_error(&closed, &adj, &times)?);
    }
    let case1 = case1_correlations(&WaveguideParams::resonant_pair(4.0))?;
    let cav = crate::waveguide::cavity_adjoints();
    closure = closure.max(closure_error(&case1, &cav, &times)?);
    checks.push(Check::at_most("time_reversal_closure", closure, 1e-10));
    checks.push(Check::holds("closure_idempotent", idempotent));

    // Conjugate pairing keeps tiered trajectories Hermitian.
    let model = two_exponential_model()?;
    let partners = conjugate_partners(&model).ok_or_else(|| Error::Assembly("modes are not conjugate-paired".into()))?;
    let index = Arc::new(AdoIndex::for_model(&model, TierCap::total(3))?);
    let op = crate::heom::HeomOperator::generator(&model, index.clone())?;
    let (s0, _) = crate::heom::heom_initial_state(&model, index.clone())?;
    let mut conj = 0.0f64;
    let mut herm = 0.0f64;
    integrate_observe(|_, y, o| op.apply(y, o), 0.0, &s0.data, &uniform_grid(20.0, 41), &tight(), |_, _, y| {
        let state = HeomState { index: index.clone(), d: 2, data: y.to_vec() };
        conj = conj.max(conjugation_defect(&state, &partners));
        herm = herm.max(hermiticity_defect(&state.rho_s()));
        Ok(())
    })?;
    checks.push(Check::at_most("conjugation_defect", conj, 1e-10));
    checks.push(Check::at_most("rho_hermiticity", herm, 1e-8));

    // Excitation grading: sector coherences stay zero.
    let p = WaveguideParams::resonant_pair(4.0);
    let mut rho = CMat::zeros(4, 4);
    rho[(0, 0)] = c(0.3, 0.0);
    rho[(2, 2)] = c(0.5, 0.0);
    rho[(1, 1)] = c(0.2, 0.0);
    rho[(2, 1)] = c(0.3, 0.0);
    rho[(1, 2)] = c(0.3, 0.0);
    let em = EmitterModel::new(&p, &case1, default_frame(&p), rho, None)?;
    let prop = Propagator::new(&em.model, Engine::Dense { n_max: 1, cap: Some(2) })?;
    let mut off = 0.0f64;
    integrate_observe(prop.rhs(), 0.0, prop.initial(), &uniform_grid(10.0, 51), &tight(), |_, _, y| {
        let r = prop.rho_s(y)?;
        for i in 0..4 {
            for j in 0..4 {
                if excitations(i) != excitations(j) {
                    off = off.max(r[(i, j)].norm());
                }
            }
        }
        Ok(())
    })?;
    checks.push(Check::at_most("off_sector_coherence", off, 1e-12));

    // ADO counts against the stars-and-bars formula, with and without side caps.
    let mut counts_ok = true;
    for pr in 0..4 {
        for ql in 0..4 {
            for l in 0..4 {
                counts_ok &= enumerate_ados(pr, ql, l)?.len() == binomial(pr + ql + l, l);
                let ch: Vec<_> = (0..pr + ql)
                    .map(|k| if k < pr { crate::modelgen::Chirality::Right } else { crate::modelgen::Chirality::Left })
                    .collect();
                let cap = TierCap { total: l, right: Some(1), left: Some(2) };
                let mut expect = 0;
                for a in 0..=1usize.min(l) {
                    for b in 0..=2usize.min(l - a) {
                        let ra = if pr == 0 { (a == 0) as usize } else { binomial(pr + a - 1, a) };
                        let lb = if ql == 0 { (b == 0) as usize } else { binomial(ql + b - 1, b) };
                        expect += ra * lb;
                    }
                }
                counts_ok &= AdoIndex::new(&ch, cap)?.len() == expect;
            }
        }
    }
    checks.push(Check::holds("ado_counts", counts_ok));

    // Fixed-step order of the integrator on y' = z y.
    let z = c(-0.5, 2.0);
    let exact = (z * 2.0).exp();
    let err = |steps| (integrate_fixed(|_, y: &[C], o: &mut [C]| o[0] = z * y[0], 0.0, &[c(1.0, 0.0)], 2.0, steps)[0] - exact).norm();
    let order = (err(20) / err(40)).log2();
    checks.push(Check::at_least("integrator_order", order, 4.5));
    checks.push(Check::at_most("integrator_order_upper", order, 5.5));
    Ok(checks)
}
