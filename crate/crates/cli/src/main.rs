//! `horolab` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid configuration or other failure,
//! 2 metric rejected, 3 outside the convergence region, 4 identity check
//! failed at its tolerance.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use horolab::geometry::SurfaceModel;
use horolab::LabError;

use crate::commands::Context;
use crate::config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("identity check failed: {0}")]
    Identity(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io(_) => 1,
            Self::Lab(LabError::MetricRejected { .. }) => 2,
            Self::Lab(LabError::InvalidModel(_)) => 1,
            Self::Lab(LabError::Region(_)) => 3,
            Self::Lab(_) => 1,
            Self::Identity(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "horolab", version, about = "Geodesic-flow laboratory for a negatively curved genus-two surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Spectral parameter as RE,IM.
    #[arg(long, global = true, value_parser = parse_lambda, allow_hyphen_values = true)]
    lambda: Option<[f64; 2]>,
    /// zero, r-, half-r- or a constant.
    #[arg(long, global = true, allow_hyphen_values = true)]
    potential: Option<String>,
    /// Length cutoff of the closed-geodesic enumeration.
    #[arg(long = "Lmax", global = true)]
    lmax: Option<f64>,
    /// Main horizon of the command: T_riccati for riccati, T_rates for
    /// rates and band-report, T_trunc for resolvent and intertwine.
    #[arg(long = "T", global = true)]
    t: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Curvature bounds and group checks of the configured surface.
    SurfaceCheck,
    /// r_± at Liouville-sampled states.
    Riccati,
    /// Expansion rates and the potential's V_max.
    Rates,
    /// Length spectrum and pressure (constant curvature only).
    Spectrum,
    /// Pointwise resolvent values, or a batch manifest.
    Resolvent,
    /// Intertwining identity at sample points.
    Intertwine,
    /// Resonance band from measured rates.
    BandReport,
    /// Every command in sequence.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::SurfaceCheck => "surface-check",
            Self::Riccati => "riccati",
            Self::Rates => "rates",
            Self::Spectrum => "spectrum",
            Self::Resolvent => "resolvent",
            Self::Intertwine => "intertwine",
            Self::BandReport => "band-report",
            Self::All => "all",
        }
    }
}

fn parse_lambda(s: &str) -> Result<[f64; 2], String> {
    let mut it = s.split(',');
    let re = it.next().unwrap_or("").trim().parse::<f64>().map_err(|e| format!("bad real part: {e}"))?;
    let im = match it.next() {
        Some(x) => x.trim().parse::<f64>().map_err(|e| format!("bad imaginary part: {e}"))?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err("expected RE,IM".into());
    }
    Ok([re, im])
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut c = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.outputs = o.clone();
    }
    if let Some(l) = cli.lambda {
        c.lambda = l;
    }
    if let Some(p) = &cli.potential {
        c.potential = p.clone();
    }
    if let Some(l) = cli.lmax {
        c.horizons.insert("Lmax".into(), l);
    }
    if let Some(t) = cli.t {
        let key = match cli.command {
            Command::Riccati => "T_riccati",
            Command::Resolvent | Command::Intertwine => "T_trunc",
            _ => "T_rates",
        };
        c.horizons.insert(key.into(), t);
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = build_config(cli)?;
    let model = SurfaceModel::from_json(&config.surface.to_string())?;
    commands::ensure_dir(&config.outputs)?;
    let cx = Context { config, model };
    match cli.command {
        Command::All => commands::all(&cx),
        other => commands::run_named(&cx, other.name()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("horolab {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
