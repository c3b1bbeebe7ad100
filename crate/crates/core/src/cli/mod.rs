//! The `rbx` command line.
//!
//! Exit codes: 0 success, 1 other runtime failure, 2 unreadable input or
//! invalid configuration, 3 the model could not be evaluated at the target,
//! 4 no context point is ε-far from the target.

mod data;
mod experiment;
mod explain;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::RbxError;

#[derive(Debug, Parser)]
#[command(
    name = "rbx",
    version,
    about = "Polytope-based local explanations for black-box models"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explain one prediction: polytope, escape distances, simple escape.
    Explain(explain::ExplainArgs),
    /// Run the synthetic recovery experiments.
    Experiment(experiment::ExperimentArgs),
    /// Serve a model file over the wire protocol (stdin/stdout or HTTP).
    Serve(serve::ServeArgs),
    /// Connect to a remote model and check that it answers consistently.
    ServeCheck(serve::ServeCheckArgs),
    /// Write a standard-Gaussian context CSV.
    GenerateContext(data::GenerateArgs),
}

/// Where predictions come from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// Builtin model file.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Shell command speaking the protocol on stdin/stdout.
    #[arg(long, value_name = "CMD")]
    model_cmd: Option<String>,
    /// HTTP endpoint speaking the protocol.
    #[arg(long, value_name = "URL")]
    model_url: Option<String>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }
}

impl From<RbxError> for Failure {
    fn from(e: RbxError) -> Self {
        let code = match e {
            RbxError::NoBoundaryInformation => 4,
            RbxError::InvalidInput(_)
            | RbxError::Parse(_)
            | RbxError::DegenerateHull
            | RbxError::AmbiguousSide { .. } => 2,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(1, e.to_string())
    }
}

pub type CliResult<T = ()> = std::result::Result<T, Failure>;

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Explain(a) => explain::run(a),
        Command::Experiment(a) => experiment::run(a),
        Command::Serve(a) => serve::run(a),
        Command::ServeCheck(a) => serve::check(a),
        Command::GenerateContext(a) => data::generate(a),
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rbx: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
