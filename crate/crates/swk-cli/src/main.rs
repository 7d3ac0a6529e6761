//! `swk`: scenario-driven front end to the singularly-weighted Kuramoto
//! laboratory.
//!
//! Exit codes: 0 pass, 1 check failed, 2 configuration error, 3 runtime
//! failure.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{ConfigError, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(ConfigError),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

#[derive(Parser)]
#[command(name = "swk", version = swk_core::VERSION, about = "Singularly-weighted Kuramoto laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

#[derive(Args)]
struct Scenario {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the seed of every generator in the scenario.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Input {
    /// Input file (JSON).
    #[arg(long, conflicts_with = "json")]
    config: Option<PathBuf>,
    /// Inline JSON input.
    json: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario; write trajectory, event log and bound reports.
    Simulate(Scenario),
    /// Regularized runs converging to the singular reference.
    SweepEpsilon {
        #[command(flatten)]
        scenario: Scenario,
        /// Comma-separated, strictly decreasing ε values; overrides `sweep.eps`.
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
    },
    /// Adaptive-coupling runs converging to the regular model.
    SweepEta {
        #[command(flatten)]
        scenario: Scenario,
        /// Comma-separated η values; overrides `sweep.eta`.
        #[arg(long, allow_hyphen_values = true)]
        eta: Option<String>,
    },
    /// Sticking verdict of a cluster: {"omegas", "K", "N", "regime"}.
    CheckSticking(Input),
    /// Membership of a frequency vector in the set-valued field.
    CheckMembership(Input),
    /// Refine an equilibrium from `theta0` and classify its stability.
    Stability(Scenario),
    /// Evaluate the requested (or every applicable) trajectory bound.
    Bounds(Scenario),
}

fn load(s: &Scenario) -> Result<config::Resolved, CliError> {
    let mut cfg: ScenarioConfig = config::read_json(&s.config)?;
    if let Some(seed) = s.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg.resolve()?)
}

fn read_input<T: serde::de::DeserializeOwned>(i: &Input) -> Result<T, CliError> {
    match (&i.config, &i.json) {
        (Some(path), _) => Ok(config::read_json(path)?),
        (None, Some(text)) => Ok(config::parse_json(text)?),
        (None, None) => Err(ConfigError::at("", "pass --config PATH or inline JSON").into()),
    }
}

fn list(flag: &str, s: &Option<String>) -> Result<Option<Vec<f64>>, CliError> {
    Ok(s.as_deref().map(|s| config::parse_list(flag, s)).transpose()?)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(s) => commands::simulate(&load(s)?, s.out.as_deref()),
        Command::SweepEpsilon { scenario, eps } => {
            let eps = list("--eps", eps)?;
            commands::sweep_epsilon(&load(scenario)?, scenario.out.as_deref(), eps)
        }
        Command::SweepEta { scenario, eta } => {
            let eta = list("--eta", eta)?;
            commands::sweep_eta(&load(scenario)?, scenario.out.as_deref(), eta)
        }
        Command::CheckSticking(i) => commands::check_sticking(&read_input(i)?),
        Command::CheckMembership(i) => commands::check_membership(&read_input(i)?),
        Command::Stability(s) => commands::stability(&load(s)?, s.out.as_deref()),
        Command::Bounds(s) => commands::bounds(&load(s)?, s.out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("swk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
