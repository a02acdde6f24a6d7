//! Subcommands that run one stage of the pipeline from a scenario config.

use crate::config::{Method, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::svg::{line_plot, Series};
use purimode_core::corrlib::{fit_exponentials, samples_from_table, time_reverse_close, CorrelationKey, CorrelationSet, ExpTerm};
use purimode_core::csvio::Table;
use purimode_core::dynamics::{spectrum_table, uniform_grid, Trajectory};
use purimode_core::modelgen::count_modes;
use purimode_core::scenario::{default_frame, emission_spectrum, emitter_state, simulate_emitters, EmitterModel};
use purimode_core::waveguide::{
    case1_correlations, case2_correlations_with, cavity_adjoints, find_n_poles, find_poles, fit_self_correlation, log_abs_f_grid,
    residues, Case2Options, PoleSet, PoleWindow, WaveguideParams,
};
use purimode_core::{Complex64, Error};
use std::path::{Path, PathBuf};

/// Output directory plus the metadata every file carries.
pub struct Sink {
    pub dir: PathBuf,
    pub meta: Vec<(String, String)>,
    pub svg: bool,
}

impl Sink {
    pub fn new(dir: &Path, config_hash: &str, command: &str, svg: bool) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        let meta = vec![
            ("command".to_string(), command.to_string()),
            ("config_hash".to_string(), config_hash.to_string()),
            ("time_unit".to_string(), "ps".to_string()),
            ("frequency_unit".to_string(), "rad/ps".to_string()),
        ];
        Ok(Self { dir: dir.to_path_buf(), meta, svg })
    }

    pub fn for_config(cfg: &ScenarioConfig, out: Option<&Path>, command: &str) -> CliResult<Self> {
        Self::new(&cfg.out_dir(out), &cfg.hash(), command, cfg.output.svg)
    }

    pub fn write(&self, name: &str, mut table: Table) -> CliResult<PathBuf> {
        let mut meta = self.meta.clone();
        // Keys the table already provides (e.g. its own units) come last.
        meta.retain(|(k, _)| table.meta_value(k).is_none());
        meta.append(&mut table.meta);
        table.meta = meta;
        let path = self.dir.join(name);
        table.write(&path)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn plot(&self, name: &str, title: &str, x_label: &str, x: &[f64], series: &[Series]) -> CliResult<()> {
        if self.svg {
            self.write_text(name, &line_plot(title, x_label, x, series))?;
        }
        Ok(())
    }
}

/// Lab-frame cavity correlations for the configured decomposition, with the
/// pole set when one was searched.
pub fn correlations(cfg: &ScenarioConfig) -> CliResult<(CorrelationSet, Option<PoleSet>)> {
    let p = cfg.waveguide();
    let d = &cfg.decomposition;
    match d.method {
        Method::Case1 => Ok((case1_correlations(&p)?, None)),
        Method::Case2 => {
            let poles = match cfg.pole_window() {
                Some(w) => find_poles(&p, &w)?,
                None => find_n_poles(&p, d.n_poles)?,
            };
            let opts = case2_options(cfg);
            Ok((case2_correlations_with(&p, &poles, &opts)?, Some(poles)))
        }
        Method::Fit => {
            let mut set = CorrelationSet::new();
            for s in &cfg.bath.samples {
                let (terms, _) = fit_sampled(&p, &s.path, d.n_terms, d.fit_tolerance)?;
                set.insert(CorrelationKey::positive(&s.a, &s.b), terms);
            }
            Ok((time_reverse_close(&set, cavity_adjoints())?, None))
        }
    }
}

fn case2_options(cfg: &ScenarioConfig) -> Case2Options {
    let d = &cfg.decomposition;
    Case2Options { n_self_terms: d.n_self_terms, fit_tolerance: d.fit_tolerance, ..Default::default() }
}

/// Fits a sampled envelope (frame rotating at `omega_0`) and returns lab-frame
/// terms with the residual relative to `|C(0)|`.
fn fit_sampled(p: &WaveguideParams, path: &Path, n_terms: usize, tol: f64) -> CliResult<(Vec<ExpTerm>, f64)> {
    let samples = samples_from_table(&Table::read(path)?)?;
    let scale = samples.first().map_or(1.0, |s| s.1.norm()).max(1e-300);
    let fit = fit_exponentials(&samples, n_terms, tol * scale)?;
    let terms = fit.terms.into_iter().map(|t| ExpTerm { omega: t.omega + p.omega_0, ..t }).collect();
    Ok((terms, fit.residual / scale))
}

/// The configured emitter model: initial state, pump and input photon.
pub fn emitter_model(cfg: &ScenarioConfig, corr: &CorrelationSet) -> CliResult<EmitterModel> {
    let p = cfg.waveguide();
    let mut em = EmitterModel::new(&p, corr, default_frame(&p), emitter_state(cfg.system.initially_excited), cfg.system.pump_rate)?;
    if let Some(n) = cfg.fields.input_photon {
        em.add_cavity_photon(n - 1)?;
    }
    Ok(em)
}

pub fn run_corr(cfg: &ScenarioConfig, sink: &Sink) -> CliResult<()> {
    let (set, _) = correlations(cfg)?;
    let p = cfg.waveguide();
    set.write_dir(&sink.dir, &sink.meta)?;
    let grid = uniform_grid(cfg.simulation.t_max, cfg.simulation.n_points);
    let mut header = vec!["t".to_string()];
    let keys: Vec<&CorrelationKey> = set.positive().map(|(k, _)| k).collect();
    for k in &keys {
        header.push(format!("{}_{}_re", k.a, k.b));
        header.push(format!("{}_{}_im", k.a, k.b));
    }
    let mut table = Table::new(&header).with_meta("frame", "omega_0").with_meta("omega_0", p.omega_0);
    for &t in &grid {
        let mut row = vec![t];
        let phase = Complex64::from_polar(1.0, p.omega_0 * t);
        for k in &keys {
            let v = set.eval(k, t)? * phase;
            row.push(v.re);
            row.push(v.im);
        }
        table.push(row);
    }
    let abs: Vec<(String, Vec<f64>)> = keys
        .iter()
        .map(|k| {
            let re = table.column(&format!("{}_{}_re", k.a, k.b)).unwrap_or_default();
            let im = table.column(&format!("{}_{}_im", k.a, k.b)).unwrap_or_default();
            (format!("|<{}(t) {}(0)>|", k.a, k.b), re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).collect())
        })
        .collect();
    sink.write("correlations.csv", table)?;
    let series: Vec<Series> = abs.iter().map(|(l, y)| Series { label: l, y, dashed: false }).collect();
    sink.plot("correlations.svg", "cavity correlations", "t (ps)", &grid, &series)?;
    println!("{} correlation entries, {} terms", set.entries.len(), set.term_count());
    Ok(())
}

/// Search window: configured, or sized for `n_poles`, or the compact one without delay.
fn search_window(cfg: &ScenarioConfig, p: &WaveguideParams) -> PoleWindow {
    cfg.pole_window().unwrap_or_else(|| if p.t_d() > 0.0 { PoleWindow::for_count(p, cfg.decomposition.n_poles) } else { PoleWindow::compact(p) })
}

pub fn write_poles(p: &WaveguideParams, window: &PoleWindow, poles: &PoleSet, sink: &Sink) -> CliResult<()> {
    let full = residues(p, &poles.roots, &[1, 2])?;
    sink.write("poles.csv", full.roots_table())?;
    for (n, m) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        if let Some(t) = full.weights_table(n, m) {
            sink.write(&format!("weights_{n}_{m}.csv"), t)?;
        }
    }
    let mut grid = Table::new(&["re_s", "im_s", "log10_abs_F"]);
    for (re, im, v) in log_abs_f_grid(p, window) {
        grid.push(vec![re, im, v]);
    }
    sink.write("abs_f_grid.csv", grid)?;
    Ok(())
}

pub fn run_poles(cfg: &ScenarioConfig, sink: &Sink) -> CliResult<()> {
    let p = cfg.waveguide();
    let window = search_window(cfg, &p);
    let poles = match cfg.pole_window() {
        Some(w) => find_poles(&p, &w)?,
        None if p.t_d() > 0.0 => find_n_poles(&p, cfg.decomposition.n_poles)?,
        None => find_poles(&p, &window)?,
    };
    write_poles(&p, &window, &poles, sink)?;
    println!("{} roots", poles.roots.len());
    Ok(())
}

pub fn run_fit(cfg: &ScenarioConfig, sink: &Sink) -> CliResult<()> {
    let p = cfg.waveguide();
    let d = &cfg.decomposition;
    match d.method {
        Method::Case1 => Err(CliError::Config("fit needs decomposition.method = \"case2\" or \"fit\"".into())),
        Method::Case2 => {
            // Residual against the number of terms, then the configured fit.
            let mut sweep = Table::new(&["n_terms", "residual_c1", "residual_c2"]);
            for n_terms in (2..=d.n_self_terms).step_by(2) {
                let mut row = vec![n_terms as f64];
                for n in 0..2 {
                    let opts = Case2Options { n_self_terms: n_terms, fit_tolerance: 0.0, ..case2_options(cfg) };
                    row.push(self_fit(&p, n, &opts)?.1);
                }
                sweep.push(row);
            }
            sink.write("fit_residuals.csv", sweep)?;
            for n in 0..2 {
                let (terms, residual) = self_fit(&p, n, &case2_options(cfg))?;
                let table = purimode_core::corrlib::terms_table(&terms).with_meta("relative_residual", residual);
                sink.write(&format!("self_terms_c{}.csv", n + 1), table)?;
                println!("c{}: {} terms, relative residual {residual:.3e}", n + 1, terms.len());
            }
            Ok(())
        }
        Method::Fit => {
            for s in &cfg.bath.samples {
                let (terms, residual) = fit_sampled(&p, &s.path, d.n_terms, d.fit_tolerance)?;
                let table = purimode_core::corrlib::terms_table(&terms).with_meta("relative_residual", residual);
                sink.write(&format!("terms_{}_{}.csv", s.a, s.b), table)?;
                println!("<{}(t) {}(0)>: {} terms, relative residual {residual:.3e}", s.a, s.b, terms.len());
            }
            Ok(())
        }
    }
}

/// The self-correlation fit; a fit above tolerance still returns its best terms
/// so the sweep can report the residual.
fn self_fit(p: &WaveguideParams, n: usize, opts: &Case2Options) -> CliResult<(Vec<ExpTerm>, f64)> {
    match fit_self_correlation(p, n, opts) {
        Ok(x) => Ok(x),
        Err(Error::FitFailure { residual, best, tolerance }) if tolerance == 0.0 => Ok((best, residual)),
        Err(e) => Err(e.into()),
    }
}

pub fn run_build(cfg: &ScenarioConfig, sink: &Sink) -> CliResult<()> {
    let (corr, _) = correlations(cfg)?;
    let em = emitter_model(cfg, &corr)?;
    let json = serde_json::to_string_pretty(&em.model).map_err(|e| CliError::Config(e.to_string()))?;
    sink.write_text("model.json", &(json + "\n"))?;
    let counts = count_modes(&em.model);
    let audit = serde_json::json!({
        "config_hash": cfg.hash(),
        "modes": counts.total,
        "by_role": counts.by_role,
        "reuse_records": counts.reuse_records,
    });
    let text = serde_json::to_string_pretty(&audit).map_err(|e| CliError::Config(e.to_string()))?;
    sink.write_text("mode_counts.json", &(text + "\n"))?;
    println!("modes: {}", counts.total);
    for (role, (r, l)) in &counts.by_role {
        println!("  {role}: {r} right, {l} left");
    }
    Ok(())
}

pub fn plot_populations(sink: &Sink, name: &str, title: &str, traj: &Trajectory) -> CliResult<()> {
    let series: Vec<(String, Vec<f64>)> = traj
        .observables
        .keys()
        .filter(|k| k.starts_with("P_") || k.starts_with("n_"))
        .map(|k| (k.clone(), traj.real(k).unwrap_or_default()))
        .collect();
    let s: Vec<Series> = series.iter().map(|(l, y)| Series { label: l, y, dashed: l.starts_with("n_") }).collect();
    sink.plot(name, title, "t (ps)", &traj.times, &s)
}

pub fn run_simulate(cfg: &ScenarioConfig, sink: &Sink) -> CliResult<()> {
    let (corr, _) = correlations(cfg)?;
    let em = emitter_model(cfg, &corr)?;
    let grid = uniform_grid(cfg.simulation.t_max, cfg.simulation.n_points);
    let traj = simulate_emitters(&em, cfg.engine(), &grid, &cfg.integrator(), cfg.fields.cavity_occupations)?;
    let table = traj.to_table().with_meta("modes", em.model.modes.len());
    sink.write("trajectory.csv", table)?;
    plot_populations(sink, "trajectory.svg", "emitter populations", &traj)?;
    Ok(())
}

pub fn run_spectrum(cfg: &ScenarioConfig, sink: &Sink) -> CliResult<()> {
    let (corr, _) = correlations(cfg)?;
    let p = cfg.waveguide();
    let w = default_frame(&p);
    let pump = cfg.system.pump_rate.unwrap_or(p.kappa1 / 20.0);
    let sim = &cfg.simulation;
    let n = cfg.fields.spectrum_cavity - 1;
    let s = emission_spectrum(&p, &corr, w, pump, n, cfg.engine(), sim.tau_max, sim.n_tau)?;
    write_spectrum(sink, "", &s, w, pump)
}

pub fn write_spectrum(
    sink: &Sink,
    suffix: &str,
    s: &purimode_core::scenario::EmissionSpectrum,
    omega_r: f64,
    pump: f64,
) -> CliResult<()> {
    let mut corr = Table::new(&["tau", "re", "im"]).with_meta("omega_r", omega_r).with_meta("pump_rate", pump);
    for (t, z) in s.tau.iter().zip(&s.correlation) {
        corr.push(vec![*t, z.re, z.im]);
    }
    sink.write(&format!("correlation{suffix}.csv"), corr)?;
    let table = spectrum_table(&s.omega, &s.spectrum)
        .with_meta("omega_r", omega_r)
        .with_meta("pump_rate", pump)
        .with_meta("population_e1", s.populations[0])
        .with_meta("population_e2", s.populations[1]);
    sink.write(&format!("spectrum{suffix}.csv"), table)?;
    // Plot the central part where the lines sit.
    let keep: Vec<usize> = (0..s.omega.len()).filter(|&k| s.omega[k].abs() <= 4.0).collect();
    let x: Vec<f64> = keep.iter().map(|&k| s.omega[k]).collect();
    let y: Vec<f64> = keep.iter().map(|&k| s.spectrum[k]).collect();
    sink.plot(&format!("spectrum{suffix}.svg"), "emission spectrum", "detuning (rad/ps)", &x, &[Series { label: "S", y: &y, dashed: false }])
}
