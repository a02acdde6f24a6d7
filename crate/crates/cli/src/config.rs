//! Scenario configuration, read from TOML.
//!
//! Every section rejects unknown keys. Omitted values take the documented
//! defaults, and `to_toml` writes a document that parses back to the same
//! config.

use crate::error::{CliError, CliResult};
use purimode_core::dynamics::{Engine, IntegratorOptions};
use purimode_core::heom::TierCap;
use purimode_core::waveguide::{PoleWindow, WaveguideParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub bath: BathSection,
    #[serde(default)]
    pub decomposition: Decomposition,
    #[serde(default)]
    pub fields: FieldsSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub emitter_wavelengths_nm: [f64; 2],
    /// `V1, V2` in rad/ps; `kappa1 / 10, kappa2 / 5` when omitted.
    pub couplings: Option<[f64; 2]>,
    pub initially_excited: [bool; 2],
    /// Incoherent pump on the first emitter, rad/ps.
    pub pump_rate: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { emitter_wavelengths_nm: [945.0, 945.0], couplings: None, initially_excited: [true, false], pump_rate: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub cavity_wavelengths_nm: [f64; 2],
    pub quality_factors: [f64; 2],
    pub x_d_over_lambda0: f64,
    /// Intrinsic loss as a fraction of `kappa_n`.
    pub intrinsic_loss_fraction: f64,
    /// Group velocity in nm/ps; speed of light when omitted.
    pub group_velocity: Option<f64>,
    /// Sampled lab-frame correlations (`t,re,im`), used with `decomposition.method = "fit"`.
    pub samples: Vec<SampledCorrelation>,
}

impl Default for BathSection {
    fn default() -> Self {
        Self {
            cavity_wavelengths_nm: [945.0, 945.0],
            quality_factors: [1000.0, 1000.0],
            x_d_over_lambda0: 4.0,
            intrinsic_loss_fraction: 0.05,
            group_velocity: None,
            samples: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledCorrelation {
    /// Correlation `<a(t) b(0)>`, e.g. `a = "c1"`, `b = "c2d"`.
    pub a: String,
    pub b: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Case1,
    Case2,
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Decomposition {
    pub method: Method,
    /// Case II: number of cross-correlation poles.
    pub n_poles: usize,
    /// Case II: explicit pole search window, `[re_min, re_max, im_min, im_max]` in rad/ps.
    pub pole_window: Option<[f64; 4]>,
    pub pole_grid: [usize; 2],
    pub n_self_terms: usize,
    /// Relative residual accepted by the exponential fits.
    pub fit_tolerance: f64,
    /// `fit`: terms per sampled correlation.
    pub n_terms: usize,
}

impl Default for Decomposition {
    fn default() -> Self {
        Self {
            method: Method::Case1,
            n_poles: 40,
            pole_window: None,
            pole_grid: [400, 400],
            n_self_terms: 18,
            fit_tolerance: 1e-2,
            n_terms: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldsSection {
    pub cavity_occupations: bool,
    /// One photon in this cavity (1 or 2) at t = 0.
    pub input_photon: Option<usize>,
    /// Cavity (1 or 2) whose emission spectrum `spectrum` computes.
    pub spectrum_cavity: usize,
}

impl Default for FieldsSection {
    fn default() -> Self {
        Self { cavity_occupations: true, input_photon: None, spectrum_cavity: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Dense,
    Tiered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub t_max: f64,
    pub n_points: usize,
    pub rtol: f64,
    pub atol: f64,
    pub engine: EngineKind,
    /// Tier cap (tiered) or total occupation cap (dense).
    pub tier: usize,
    /// Per-chirality tier caps.
    pub side_cap: Option<usize>,
    /// Dense Fock cutoff per mode.
    pub n_max: usize,
    pub tau_max: f64,
    pub n_tau: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            t_max: 20.0,
            n_points: 401,
            rtol: 1e-8,
            atol: 1e-10,
            engine: EngineKind::Tiered,
            tier: 2,
            side_cap: Some(1),
            n_max: 2,
            tau_max: 200.0,
            n_tau: 4001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), svg: true }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            system: SystemSection::default(),
            bath: BathSection::default(),
            decomposition: Decomposition::default(),
            fields: FieldsSection::default(),
            simulation: SimulationSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // Sample paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.bath.samples {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, as hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        let sim = &self.simulation;
        if !(sim.t_max > 0.0) || sim.n_points < 2 {
            return bad("simulation needs t_max > 0 and n_points >= 2");
        }
        if !(sim.rtol > 0.0 && sim.atol > 0.0) {
            return bad("rtol and atol must be positive");
        }
        if !(sim.tau_max > 0.0) || sim.n_tau < 2 {
            return bad("simulation needs tau_max > 0 and n_tau >= 2");
        }
        if sim.tier == 0 || sim.n_max == 0 {
            return bad("tier and n_max must be at least 1");
        }
        if let Some(n) = self.fields.input_photon {
            if !(1..=2).contains(&n) {
                return bad("fields.input_photon must be 1 or 2");
            }
        }
        if !(1..=2).contains(&self.fields.spectrum_cavity) {
            return bad("fields.spectrum_cavity must be 1 or 2");
        }
        if self.system.pump_rate.is_some_and(|r| !(r >= 0.0)) {
            return bad("system.pump_rate must be non-negative");
        }
        let b = &self.bath;
        if !(b.x_d_over_lambda0 >= 0.0) || !(b.intrinsic_loss_fraction >= 0.0) {
            return bad("bath.x_d_over_lambda0 and bath.intrinsic_loss_fraction must be non-negative");
        }
        if b.quality_factors.iter().any(|&q| !(q > 0.0)) {
            return bad("bath.quality_factors must be positive");
        }
        let d = &self.decomposition;
        match d.method {
            Method::Fit if b.samples.is_empty() => return bad("decomposition.method = \"fit\" needs bath.samples"),
            Method::Case1 | Method::Case2 if !b.samples.is_empty() => {
                return bad("bath.samples are only used with decomposition.method = \"fit\"")
            }
            _ => {}
        }
        if d.method == Method::Case2 && (d.n_poles == 0 || d.n_self_terms == 0) {
            return bad("case2 needs n_poles and n_self_terms");
        }
        if d.method == Method::Fit && d.n_terms == 0 {
            return bad("fit needs n_terms >= 1");
        }
        self.waveguide().validate().map_err(CliError::from)
    }

    pub fn waveguide(&self) -> WaveguideParams {
        let b = &self.bath;
        let mut p = WaveguideParams::from_wavelengths(
            b.cavity_wavelengths_nm,
            self.system.emitter_wavelengths_nm,
            b.quality_factors,
            0.0,
        );
        if let Some(vg) = b.group_velocity {
            p.v_g = vg;
        }
        p.x_d = b.x_d_over_lambda0 * p.lambda_0();
        p.kappa_i1 = b.intrinsic_loss_fraction * p.kappa1;
        p.kappa_i2 = b.intrinsic_loss_fraction * p.kappa2;
        if let Some([v1, v2]) = self.system.couplings {
            p.v1 = v1;
            p.v2 = v2;
        }
        p
    }

    /// Explicit pole search window, if configured.
    pub fn pole_window(&self) -> Option<PoleWindow> {
        let grid = (self.decomposition.pole_grid[0], self.decomposition.pole_grid[1]);
        self.decomposition.pole_window.map(|[a, b, c, d]| PoleWindow { re_range: (a, b), im_range: (c, d), grid })
    }

    pub fn engine(&self) -> Engine {
        let sim = &self.simulation;
        match sim.engine {
            EngineKind::Dense => Engine::Dense { n_max: sim.n_max, cap: Some(sim.tier) },
            EngineKind::Tiered => Engine::Tiered { cap: TierCap { total: sim.tier, right: sim.side_cap, left: sim.side_cap } },
        }
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions { rtol: self.simulation.rtol, atol: self.simulation.atol, ..Default::default() }
    }

    pub fn out_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf).unwrap_or_else(|| self.output.dir.clone())
    }
}
