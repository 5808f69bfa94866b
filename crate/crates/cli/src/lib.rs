//! `sdesim` command-line front end.
//!
//! Every setting is resolved as flag > config file > default, recorded in a
//! flat manifest, and parsed with one `FromStr` per type, so
//! `sdesim <cmd> --config out/manifest.json` repeats a run exactly.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sdesim_core::SdeError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

impl From<SdeError> for CliError {
    fn from(e: SdeError) -> Self {
        match e {
            SdeError::InvalidParameter { .. } | SdeError::Config(_) | SdeError::Unsupported(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "sdesim", version, about = "Strong and weak SDE simulation, convergence studies and checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed of the per-path random streams [default: 42]
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads; 0 uses every core [default: 0]
    #[arg(long, global = true)]
    pub threads: Option<String>,
    /// Directory for output files and manifest.json (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// csv or json [default: csv]
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Flat JSON or TOML file of settings; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate sample paths and write trajectories
    Simulate(RunArgs),
    /// Matched-path strong error at each level and the fitted order
    Converge(RunArgs),
    /// Euler–Maruyama on binomial vs Gaussian increments for GBM
    WeakStrong(WeakStrongArgs),
    /// Lévy-area sampler against the Fourier oracle
    LevyTest(LevyArgs),
    /// Feynman–Kac PDE value against a Monte Carlo estimate
    FkCheck(FkArgs),
    /// Exact word identities and quick numerical checks
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Converge(_) => "converge",
            Command::WeakStrong(_) => "weak-strong",
            Command::LevyTest(_) => "levy-test",
            Command::FkCheck(_) => "fk-check",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// gbm | langevin | heston | linear2d
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    /// Initial state, comma-separated, in observed coordinates (Heston: S,v)
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// em | milstein | cg-half | cg-one | heston-ft
    #[arg(long)]
    pub scheme: Option<String>,
    /// RK4 sub-steps of the Castell–Gaines frozen-field ODE
    #[arg(long)]
    pub ode_substeps: Option<String>,
    /// none | kl | rw | cond
    #[arg(long)]
    pub area_sampler: Option<String>,
    /// Area sampler budget Q: auto or a positive integer
    #[arg(long)]
    pub area_q: Option<String>,
    /// Scheme for the finest-level reference (converge only)
    #[arg(long)]
    pub reference_scheme: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    /// Finest level: h = (T - t0) / 2^m
    #[arg(long)]
    pub m: Option<String>,
    /// Coarsest level
    #[arg(long)]
    pub m_start: Option<String>,
    /// Number of paths P
    #[arg(long)]
    pub paths: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct WeakStrongArgs {
    /// Must be gbm when given
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long)]
    pub paths: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct LevyArgs {
    /// ks (distribution test) or cond-rms (conditional-expectation error)
    #[arg(long)]
    pub check: Option<String>,
    /// kl | rw | cond
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub dw1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub dw2: Option<String>,
    /// Number of draws (accepts 1e5)
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub area_q: Option<String>,
    /// Maximum KS distance for a pass
    #[arg(long)]
    pub threshold: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct FkArgs {
    /// langevin | gbm
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    /// Payoff: id | square | exp
    #[arg(long)]
    pub f: Option<String>,
    /// Horizon t
    #[arg(long = "t", alias = "t-end")]
    pub t_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<String>,
    /// PDE grid points
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub paths: Option<String>,
    /// Monte Carlo step h = t / 2^m
    #[arg(long)]
    pub m: Option<String>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sdesim {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
