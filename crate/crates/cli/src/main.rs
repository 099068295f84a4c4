//! `opnet`: generate PDE datasets, train neural operators and evaluate them
//! at any resolution.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Configuration mistakes and mode violations are the caller's fault;
/// everything else is a runtime failure.
impl From<opnet::Error> for CliError {
    fn from(e: opnet::Error) -> CliError {
        match e {
            opnet::Error::Config(_) | opnet::Error::ModeViolation { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "opnet", version, about = "Neural operators on function-valued data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Darcy or Burgers dataset.
    Generate(GenerateArgs),
    /// Train a model from a `key = value` config file.
    Train(TrainArgs),
    /// Relative L2 (and optionally H1) error of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Predict `y_pred` for the inputs `x` of a dataset file.
    Infer(InferArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// darcy or burgers
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub count: usize,
    /// Grid points per axis.
    #[arg(long)]
    pub res: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub grf_tau: Option<f64>,
    #[arg(long)]
    pub grf_alpha: Option<f64>,
    #[arg(long)]
    pub grf_sigma: Option<f64>,
    #[arg(long)]
    pub a_hi: Option<f64>,
    #[arg(long)]
    pub a_lo: Option<f64>,
    #[arg(long)]
    pub forcing: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub final_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated resolutions; each must divide the stored one.
    #[arg(long, value_delimiter = ',')]
    pub res: Vec<usize>,
    /// Also report the relative H1 error.
    #[arg(long)]
    pub h1: bool,
    /// Samples to skip from the start of the file.
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    /// Samples to use after skipping (default: all remaining).
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output grid: one size for every axis or one per axis
    /// (default: the input grid).
    #[arg(long, value_delimiter = ',')]
    pub res: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Selftest => commands::selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
