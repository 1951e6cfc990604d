//! `phasediff` command-line front end: trade-off datasets, calibration
//! curves, estimation and the simulated device experiment.
//!
//! Exit codes: 0 on success, 2 for invalid configuration, 3 for numerical
//! failures.

mod commands;
mod grid;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use crate::output::Format;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser, Debug)]
#[command(
    name = "phasediff",
    version,
    about = "Joint phase and dephasing estimation with weak measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quantum Fisher information of the dephased probe over a δ grid.
    Qfi(Common),
    /// Information ratios against measurement strength at fixed (φ, δ).
    Tradeoff(Common),
    /// Strengths favouring φ over a (θ, δ) grid, with the boundary curve.
    Region(Common),
    /// Classical Fisher matrix of the weak scheme over (φ, δ, θ) grids.
    Fisher(Common),
    /// Calibration curves of the interferometric device.
    Simulate(Common),
    /// Sample weak-scheme counts and fit (φ, δ) by maximum likelihood.
    Estimate(Common),
    /// Mixed-state sweep and Monte Carlo covariance on the simulated device.
    Experiment(Common),
}

/// Flags shared by every subcommand. Values and grids accept `pi`
/// multiples, comma lists and `start:stop:count` ranges.
#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// Phase φ (rad); value or grid.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Diffusion δ; value or grid.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Measurement strength θ (rad); value or grid.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Sagnac half-wave plate angle ω (degrees).
    #[arg(long = "omega-deg", allow_hyphen_values = true)]
    omega_deg: Option<String>,
    /// Number of shots M.
    #[arg(long)]
    shots: Option<u64>,
    /// Monte Carlo repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed for stochastic commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative standard deviation of detector noise.
    #[arg(long, allow_hyphen_values = true)]
    noise: Option<f64>,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with defaults for any of these flags (keys use underscores).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Calibration grid step in HWP1 degrees.
    #[arg(long = "calibration-step", allow_hyphen_values = true)]
    calibration_step: Option<f64>,
    /// Scale M′ of the comparison covariance.
    #[arg(long = "m-prime", allow_hyphen_values = true)]
    m_prime: Option<f64>,
    /// Fraction of shots spent in stage 1 of the adaptive scheme.
    #[arg(long, allow_hyphen_values = true)]
    stage1: Option<f64>,
    /// Observed counts to fit instead of sampling, comma separated.
    #[arg(long)]
    counts: Option<String>,
    /// Per-run Monte Carlo samples (CSV) for `experiment`.
    #[arg(long)]
    samples: Option<PathBuf>,
}

/// Config-file mirror of [`Common`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    phi: Option<Value>,
    delta: Option<Value>,
    theta: Option<Value>,
    omega_deg: Option<Value>,
    shots: Option<u64>,
    reps: Option<usize>,
    seed: Option<u64>,
    noise: Option<f64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    calibration_step: Option<f64>,
    m_prime: Option<f64>,
    stage1: Option<f64>,
    counts: Option<Value>,
    samples: Option<PathBuf>,
}

/// Grid-valued JSON entry: number, string in flag syntax, or number array.
fn value_to_string(key: &str, v: Value) -> Result<String, ConfigError> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s),
        Value::Array(items) => items
            .into_iter()
            .map(|x| match x {
                Value::Number(n) => Ok(n.to_string()),
                other => Err(ConfigError(format!("config key '{key}': unexpected entry {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        other => Err(ConfigError(format!("config key '{key}': unexpected value {other}"))),
    }
}

fn load_config(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
}

/// Settings after merging explicit flags over the config file.
#[derive(Debug, Clone, Default)]
pub struct Run {
    pub phi: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub omega_deg: Option<Vec<f64>>,
    pub shots: Option<u64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub calibration_step: Option<f64>,
    pub m_prime: Option<f64>,
    pub stage1: Option<f64>,
    pub counts: Option<Vec<f64>>,
    pub samples: Option<PathBuf>,
}

fn resolve(flags: Common) -> Result<Run, ConfigError> {
    let file = match &flags.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let grid = |key: &str, flag: Option<String>, from_file: Option<Value>| -> Result<Option<Vec<f64>>, ConfigError> {
        let text = match (flag, from_file) {
            (Some(s), _) => Some(s),
            (None, Some(v)) => Some(value_to_string(key, v)?),
            (None, None) => None,
        };
        text.map(|t| grid::parse_grid(&t)).transpose()
    };
    Ok(Run {
        phi: grid("phi", flags.phi, file.phi)?,
        delta: grid("delta", flags.delta, file.delta)?,
        theta: grid("theta", flags.theta, file.theta)?,
        omega_deg: grid("omega_deg", flags.omega_deg, file.omega_deg)?,
        shots: flags.shots.or(file.shots),
        reps: flags.reps.or(file.reps),
        seed: flags.seed.or(file.seed),
        noise: flags.noise.or(file.noise),
        format: flags.format.or(file.format).unwrap_or_default(),
        out: flags.out.or(file.out),
        calibration_step: flags.calibration_step.or(file.calibration_step),
        m_prime: flags.m_prime.or(file.m_prime),
        stage1: flags.stage1.or(file.stage1),
        counts: grid("counts", flags.counts, file.counts)?,
        samples: flags.samples.or(file.samples),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use phasediff::Error as E;
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::NegativeDiffusion(_)
            | E::StrengthOutOfRange(_)
            | E::PlateAngleOutOfRange(_)
            | E::WeightOutOfRange(_)
            | E::InvalidStep(_)
            | E::InvalidArgument(_)
            | E::NotNormalized(_)
            | E::AmplitudeNotNormalized(_)
            | E::BlochNormTooLarge(_),
        ) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (flags, cmd): (Common, fn(&Run) -> anyhow::Result<commands::Output>) = match cli.command {
        Command::Qfi(c) => (c, commands::qfi),
        Command::Tradeoff(c) => (c, commands::tradeoff),
        Command::Region(c) => (c, commands::region),
        Command::Fisher(c) => (c, commands::fisher),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Estimate(c) => (c, commands::estimate),
        Command::Experiment(c) => (c, commands::experiment),
    };
    let run = resolve(flags)?;
    let out = cmd(&run)?;
    for (path, text) in &out.extra_files {
        std::fs::write(path, text)?;
    }
    match &run.out {
        Some(path) => std::fs::write(path, &out.main)?,
        None => print!("{}", out.main),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
