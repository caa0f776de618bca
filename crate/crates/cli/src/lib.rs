//! Command-line driver: configs in, CSV and JSON artifacts out.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<hyperlangevin::Error> for CliError {
    fn from(e: hyperlangevin::Error) -> Self {
        use hyperlangevin::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidParams(_) | E::DimensionMismatch { .. } | E::InvalidAlgebra(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperlangevin", version, about = "Langevin dynamics on the affine-group hyperboloid")]
pub struct Cli {
    /// Experiment config (TOML). Defaults to the hyperboloid experiment.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `ensemble.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Deterministic RK4 trajectory.
    Trajectory,
    /// Stochastic ensemble.
    Simulate,
    /// Long-time Fokker-Planck solution.
    FpkSolve,
    /// Angular eigenvalues and eigenfunctions.
    Eigens,
    /// Candidate equilibria: tables, modes, normalizability.
    Equilibrium,
    /// Monte Carlo against the PDE and the candidates.
    Compare,
    /// Validates the config and prints the effective version.
    CheckConfig,
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(cfg.with_overrides(cli.seed, cli.out.clone()))
}

pub fn dispatch(command: Command, cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    match command {
        Command::Trajectory => commands::cmd_trajectory(cfg).map(|o| o.lines),
        Command::Simulate => commands::cmd_simulate(cfg).map(|o| o.lines),
        Command::FpkSolve => commands::cmd_fpk_solve(cfg).map(|o| o.lines),
        Command::Eigens => commands::cmd_eigens(cfg).map(|o| o.lines),
        Command::Equilibrium => commands::cmd_equilibrium(cfg).map(|o| o.lines),
        Command::Compare => commands::cmd_compare(cfg).map(|o| o.lines),
        Command::CheckConfig => commands::cmd_check_config(cfg),
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = load_config(cli)?;
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| dispatch(cli.command, &cfg)),
        None => dispatch(cli.command, &cfg),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(lines) => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            for l in lines {
                // A closed pipe (e.g. `| head`) is not a failure.
                if writeln!(out, "{l}").is_err() {
                    break;
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
