//! Two emitters coupled to the cavity bath, in the frame rotating at `omega_r`.
//!
//! The emitter space is `e1 (x) e2` with index `2 i1 + i2` and `0` the ground
//! state. Coupling labels `X1 = V1 c1`, `X1d = V1 c1^dag` (and likewise for the
//! second emitter) pair with `sigma_n^+` and `sigma_n^-`.

use crate::corrlib::{adjoint_table, time_reverse_close, CorrelationKey, CorrelationSet, ExpTerm};
use crate::dynamics::{
    integrate, spectrum, two_time_correlation, Engine, IntegratorOptions, Observable, Propagator, SpectrumOptions, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{c, dagger, embed, sigma_minus, CMat};
use crate::liouville::{assemble_case1_lindblad, expectation_doubled};
use crate::modelgen::{build_system_model, ModelSpec, Side, SystemSpec};
use crate::waveguide::{WaveguideParams, CAVITY, CAVITY_DAG};
use num_complex::Complex64;

pub const EMITTER_DIM: usize = 4;
pub const COUPLING: [&str; 2] = ["X1", "X2"];
pub const COUPLING_DAG: [&str; 2] = ["X1d", "X2d"];
pub const PUMP_OPERATOR: &str = "sigma1_plus";

/// `+1` for annihilation-type labels, `-1` for creation-type (`...d`) labels.
pub fn label_charge(label: &str) -> f64 {
    if label.ends_with('d') {
        -1.0
    } else {
        1.0
    }
}

/// Moves every term into the frame rotating at `omega_r`.
///
/// Both time signs shift by `charge(a) * omega_r`, since the first label
/// carries the time argument in either case.
pub fn frame_shift(set: &CorrelationSet, omega_r: f64, charge: impl Fn(&str) -> f64) -> CorrelationSet {
    let mut out = CorrelationSet::new();
    for (key, terms) in &set.entries {
        let q = charge(&key.a);
        let shifted = terms.iter().map(|t| ExpTerm { omega: t.omega - q * omega_r, ..*t }).collect();
        out.insert(key.clone(), shifted);
    }
    out
}

/// Default rotating frame: mean cavity frequency.
pub fn default_frame(p: &WaveguideParams) -> f64 {
    0.5 * (p.omega_c(0) + p.omega_c(1))
}

pub fn emitter_lowering(n: usize) -> CMat {
    embed(&sigma_minus(), n, &[2, 2])
}

/// Projector onto the excited state of emitter `n`.
pub fn emitter_population(n: usize) -> CMat {
    let sm = emitter_lowering(n);
    dagger(&sm) * sm
}

/// Pure product state with emitter `n` excited when `excited[n]`.
pub fn emitter_state(excited: [bool; 2]) -> CMat {
    let k = 2 * excited[0] as usize + excited[1] as usize;
    let mut rho = CMat::zeros(EMITTER_DIM, EMITTER_DIM);
    rho[(k, k)] = c(1.0, 0.0);
    rho
}

pub fn emitter_system(p: &WaveguideParams, omega_r: f64) -> SystemSpec {
    let mut h = CMat::zeros(EMITTER_DIM, EMITTER_DIM);
    for n in 0..2 {
        h += emitter_population(n) * c(p.omega_e(n) - omega_r, 0.0);
    }
    let mut sys = SystemSpec::new(h);
    for n in 0..2 {
        let sm = emitter_lowering(n);
        sys = sys
            .with_coupling(COUPLING[n], dagger(&sm), COUPLING_DAG[n])
            .with_coupling(COUPLING_DAG[n], sm, COUPLING[n]);
        let v = p.coupling(n);
        let prop = |x: &'static str| if v != 0.0 { Some((x, c(1.0 / v, 0.0))) } else { None };
        sys = sys
            .with_field(CAVITY[n], prop(COUPLING[n]))
            .with_field(CAVITY_DAG[n], prop(COUPLING_DAG[n]));
    }
    sys.add_operator(PUMP_OPERATOR, dagger(&emitter_lowering(0)));
    for n in 0..2 {
        sys.add_operator(&format!("n_e{}", n + 1), emitter_population(n));
    }
    sys
}

/// Lab-frame cavity correlations to rotating-frame coupling and field correlations.
pub fn emitter_correlations(p: &WaveguideParams, cavity: &CorrelationSet, omega_r: f64) -> CorrelationSet {
    let shifted = frame_shift(cavity, omega_r, label_charge);
    let one = Complex64::new(1.0, 0.0);
    let mut defs: Vec<(&str, &str, Complex64)> = Vec::new();
    for n in 0..2 {
        let v = c(p.coupling(n), 0.0);
        defs.push((COUPLING[n], CAVITY[n], v));
        defs.push((COUPLING_DAG[n], CAVITY_DAG[n], v));
        defs.push((CAVITY[n], CAVITY[n], one));
        defs.push((CAVITY_DAG[n], CAVITY_DAG[n], one));
    }
    shifted.linear_map(&defs)
}

/// System coupled through `lambda (S d + S^dag d^dag)` to one damped mode in
/// vacuum, written as the bath correlation `lambda^2 e^{-i Omega t - Gamma |t|}`.
pub fn single_mode_model(h_s: &CMat, s: &CMat, omega: f64, gamma: f64, lambda: f64) -> Result<ModelSpec> {
    let mut set = CorrelationSet::new();
    set.insert(CorrelationKey::positive("X", "Xd"), vec![ExpTerm::new(c(lambda * lambda, 0.0), omega, gamma)]);
    let set = time_reverse_close(&set, adjoint_table(&[("X", "Xd")]))?;
    let sys = SystemSpec::new(h_s.clone()).with_coupling("X", s.clone(), "Xd").with_coupling("Xd", dagger(s), "X");
    build_system_model(&set, &sys)
}

#[derive(Debug, Clone)]
pub struct EmitterModel {
    pub model: ModelSpec,
    pub correlations: CorrelationSet,
    pub omega_r: f64,
}

impl EmitterModel {
    /// System-dynamics model with initial emitter state `rho_s` and optional pump rate.
    pub fn new(p: &WaveguideParams, cavity: &CorrelationSet, omega_r: f64, rho_s: CMat, pump: Option<f64>) -> Result<Self> {
        let correlations = emitter_correlations(p, cavity, omega_r);
        let mut model = build_system_model(&correlations, &emitter_system(p, omega_r))?;
        model.set_initial_rho(rho_s);
        if let Some(rate) = pump {
            if rate < 0.0 {
                return Err(Error::Domain(format!("pump rate {rate} is negative")));
            }
            model.add_lindblad(PUMP_OPERATOR, rate)?;
        }
        Ok(Self { model, correlations, omega_r })
    }

    /// One photon in cavity `n` at t = 0: `rho_B = c_n^dag |0><0| c_n`.
    pub fn add_cavity_photon(&mut self, n: usize) -> Result<()> {
        self.model.attach_input_field(CAVITY_DAG[n], Side::Left, &self.correlations)?;
        self.model.attach_input_field(CAVITY[n], Side::Right, &self.correlations)?;
        Ok(())
    }

    /// Insertion indices `(c_n on the left, c_n^dag on the right)` for `<c_n^dag c_n>`.
    pub fn cavity_occupation(&mut self, n: usize) -> Result<(usize, usize)> {
        let l = self.model.attach_output_field(CAVITY[n], Side::Left, &self.correlations)?;
        let r = self.model.attach_output_field(CAVITY_DAG[n], Side::Right, &self.correlations)?;
        Ok((l, r))
    }
}

/// Integrates the emitter model and records `P_e1`, `P_e2`, `trace` and, when
/// `cavities` is set, the occupations `n_c1`, `n_c2`.
pub fn simulate_emitters(
    em: &EmitterModel,
    engine: Engine,
    t_grid: &[f64],
    opts: &IntegratorOptions,
    cavities: bool,
) -> Result<Trajectory> {
    let mut em = em.clone();
    let occ = if cavities { Some([em.cavity_occupation(0)?, em.cavity_occupation(1)?]) } else { None };
    let prop = Propagator::new(&em.model, engine)?;
    let prop = &prop;
    let mut obs: Vec<(String, Observable)> = Vec::new();
    for n in 0..2 {
        let pn = emitter_population(n);
        obs.push((format!("P_e{}", n + 1), Box::new(move |y| Ok((&pn * prop.rho_s(y)?).trace()))));
    }
    obs.push(("trace".into(), Box::new(|y| Ok(prop.trace(y)))));
    if let Some(occ) = occ {
        for (n, (l, r)) in occ.into_iter().enumerate() {
            obs.push((
                format!("n_c{}", n + 1),
                Box::new(move |y| Ok(prop.trace(&prop.insert(r, &prop.insert(l, y)?)?))),
            ));
        }
    }
    integrate(prop.rhs(), prop.initial(), t_grid, opts, &obs, false)
}

/// Markovian emitter-cavity reference with Fock cutoff `n_max`: `P_e1`, `P_e2`, `n_c1`, `n_c2`.
pub fn case1_lindblad_trajectory(
    p: &WaveguideParams,
    omega_r: f64,
    excited: [bool; 2],
    n_max: usize,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let (c1, op) = assemble_case1_lindblad(p, omega_r, n_max)?;
    let y0 = c1.layout.embed_vacuum(&emitter_state(excited))?;
    let layout = &c1.layout;
    let mut obs: Vec<(String, Observable)> = Vec::new();
    for n in 0..2 {
        let pop = dagger(&c1.sigma_minus[n]) * &c1.sigma_minus[n];
        obs.push((format!("P_e{}", n + 1), Box::new(move |y| expectation_doubled(layout, y, &pop))));
        let occ = dagger(&c1.cavity[n]) * &c1.cavity[n];
        obs.push((format!("n_c{}", n + 1), Box::new(move |y| expectation_doubled(layout, y, &occ))));
    }
    integrate(crate::dynamics::sparse_rhs(&op), &y0, t_grid, opts, &obs, false)
}

/// Steady-state emission spectrum of one cavity under the pump.
#[derive(Debug, Clone)]
pub struct EmissionSpectrum {
    pub tau: Vec<f64>,
    /// `<c^dag(t + tau) c(t)>_ss`.
    pub correlation: Vec<Complex64>,
    /// Detuning from `omega_r`, rad/ps.
    pub omega: Vec<f64>,
    pub spectrum: Vec<f64>,
    /// Steady emitter populations.
    pub populations: [f64; 2],
}

/// Quantum regression for `<c_n^dag(t + tau) c_n(t)>_ss` with `E1` pumped at `pump`.
///
/// In a vacuum bath an annihilator inserted on the ket at time `t` only
/// contracts with earlier couplings, so the output insertions stay exact at
/// intermediate times.
#[allow(clippy::too_many_arguments)]
pub fn emission_spectrum(
    p: &WaveguideParams,
    cavity: &CorrelationSet,
    omega_r: f64,
    pump: f64,
    n: usize,
    engine: Engine,
    tau_max: f64,
    n_tau: usize,
) -> Result<EmissionSpectrum> {
    if n_tau < 2 || tau_max <= 0.0 {
        return Err(Error::Domain("tau grid needs a positive window and two points".into()));
    }
    let rho0 = emitter_state([false, false]);
    let mut em = EmitterModel::new(p, cavity, omega_r, rho0, Some(pump))?;
    let (ins_c, ins_cd) = em.cavity_occupation(n)?;
    let prop = Propagator::new(&em.model, engine)?;
    let ss = prop.steady_state(1e-10)?;
    let rho = prop.rho_s(&ss)?;
    let populations = [0, 1].map(|k| (emitter_population(k) * &rho).trace().re);
    let y_b = prop.insert(ins_c, &ss)?;
    let dt = tau_max / (n_tau - 1) as f64;
    let tau: Vec<f64> = (0..n_tau).map(|k| k as f64 * dt).collect();
    let opts = IntegratorOptions { rtol: 1e-9, atol: 1e-13, ..Default::default() };
    let correlation = two_time_correlation(prop.rhs(), &y_b, &tau, &opts, |y| Ok(prop.trace(&prop.insert(ins_cd, y)?)))?;
    let (omega, spectrum) = spectrum(&correlation, dt, &SpectrumOptions::default());
    Ok(EmissionSpectrum { tau, correlation, omega, spectrum, populations })
}
