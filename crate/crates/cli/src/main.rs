mod config;
mod error;
mod figure3;
mod pipeline;
mod svg;

use clap::{Parser, Subcommand};
use config::ScenarioConfig;
use error::{CliError, CliResult};
use pipeline::Sink;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "purimode", version, about = "Purified pseudomode simulations of emitters in a waveguide bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Bath correlation decompositions and sampled envelopes.
    Corr,
    /// Roots of the delay equation, residue weights and the |F| grid.
    Poles,
    /// Self-correlation fits with a residual sweep over the term count.
    Fit,
    /// Purified model document and mode-count audit.
    Build,
    /// Emitter populations and cavity occupations.
    Simulate,
    /// Steady-state emission spectrum under the pump.
    Spectrum,
    /// Runs the acceptance criteria and writes a JSON report.
    Validate {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Desk-scale reproduction of one waveguide scenario.
    Figure3 {
        #[arg(value_enum)]
        panel: figure3::Panel,
        /// Emitter separation in wavelengths.
        #[arg(long)]
        xd: Option<f64>,
    },
}

fn load(cli: &Cli) -> CliResult<ScenarioConfig> {
    match &cli.config {
        Some(path) => ScenarioConfig::load(path),
        None => Err(CliError::Config("this command needs --config PATH".into())),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("PURIMODE_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("PURIMODE_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn validate(only: &[usize], cfg: Option<&ScenarioConfig>, out: Option<&Path>) -> CliResult<()> {
    use purimode_core::validation::{run_criterion, CRITERIA};
    let ids: Vec<usize> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only.to_vec() };
    let mut reports = Vec::new();
    for id in ids {
        let report = run_criterion(id)?;
        println!("{}", report.line());
        reports.push(report);
    }
    let failed: Vec<usize> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let dir = match (out, cfg) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(c)) => c.output.dir.clone(),
        (None, None) => PathBuf::from("out"),
    };
    std::fs::create_dir_all(&dir)?;
    let doc = serde_json::json!({ "passed": failed.is_empty(), "failed": failed, "criteria": reports });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(dir.join("validation.json"), text + "\n")?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(failed))
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate { only } => {
            let cfg = cli.config.as_ref().map(|_| load(cli)).transpose()?;
            validate(only, cfg.as_ref(), out)
        }
        Command::Figure3 { panel, xd } => {
            let xd = xd.unwrap_or(panel.default_xd());
            // A config, when given, only supplies the output settings.
            let cfg = cli.config.as_ref().map(|_| load(cli)).transpose()?.unwrap_or_default();
            let name = format!("figure3-{panel:?}").to_lowercase();
            let hash = format!("{}:xd={xd}", cfg.hash());
            let dir = cfg.out_dir(out).join(&name);
            figure3::run(*panel, xd, &Sink::new(&dir, &hash, &name, cfg.output.svg)?)
        }
        cmd => {
            let cfg = load(cli)?;
            let name = match cmd {
                Command::Corr => "corr",
                Command::Poles => "poles",
                Command::Fit => "fit",
                Command::Build => "build",
                Command::Simulate => "simulate",
                _ => "spectrum",
            };
            let sink = Sink::for_config(&cfg, out, name)?;
            sink.write_text("config.toml", &cfg.to_toml())?;
            match cmd {
                Command::Corr => pipeline::run_corr(&cfg, &sink),
                Command::Poles => pipeline::run_poles(&cfg, &sink),
                Command::Fit => pipeline::run_fit(&cfg, &sink),
                Command::Build => pipeline::run_build(&cfg, &sink),
                Command::Simulate => pipeline::run_simulate(&cfg, &sink),
                _ => pipeline::run_spectrum(&cfg, &sink),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
