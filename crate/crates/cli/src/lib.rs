//! The `lpoi` command line: list building, gradient checks, training,
//! synthetic benchmarks, ablations, rendering and file validation.
//!
//! Every command accepts `--config FILE`, a TOML file with one table per
//! command (`[train]`, `[build-lists]`, ...). Flags override file values.
//! Commands that write files also write the fully resolved settings to
//! `resolved-config.toml` in their output directory; passing that file back
//! with `--config` reproduces the run.
//!
//! Exit codes: 0 success, 2 partial (samples skipped or nothing produced),
//! 1 runtime failure, 64 usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use lpoi_core::imageio::ImageIoError;
use lpoi_core::listgen::ListgenError;
use lpoi_core::masking::MaskError;
use lpoi_core::surrogate::SurrogateError;
use lpoi_core::synthbench::SynthError;

pub mod commands;
pub mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error(transparent)]
    Listgen(#[from] ListgenError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Image(#[from] ImageIoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.into(),
            message: e.to_string(),
        }
    }
}

/// How a command that ran to completion went.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Partial,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::Partial => EXIT_PARTIAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpoi", version, about = "Listwise masked-image preference toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build ranked masked-image lists from a manifest and detections.
    BuildLists(commands::build::BuildListsArgs),
    /// Compare analytic and finite-difference gradients of the training objective.
    GradCheck(commands::train::GradCheckArgs),
    /// Train the toy policy on a built dataset or on synthetic scenes.
    Train(commands::train::TrainArgs),
    /// Run the synthetic CHAIR benchmark for the full and pairwise-only objectives.
    Bench(commands::synth::BenchArgs),
    /// Run the list-size ablation on the synthetic benchmark.
    Ablate(commands::synth::AblateArgs),
    /// Write the masked images of one sample as PNGs.
    Render(commands::build::RenderArgs),
    /// Check detections, verdicts, manifest or dataset files against their schemas.
    Validate(commands::validate::ValidateArgs),
}

pub fn execute(command: Command) -> Result<Status, CliError> {
    match command {
        Command::BuildLists(a) => commands::build::build_lists(a),
        Command::GradCheck(a) => commands::train::grad_check(a),
        Command::Train(a) => commands::train::train(a),
        Command::Bench(a) => commands::synth::bench(a),
        Command::Ablate(a) => commands::synth::ablate(a),
        Command::Render(a) => commands::build::render(a),
        Command::Validate(a) => commands::validate::validate(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let kind = if matches!(e, CliError::Usage(_)) {
                "usage"
            } else {
                "failed"
            };
            eprintln!("error[{kind}]: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `lpoi help` for usage");
            }
            e.exit_code()
        }
    }
}
