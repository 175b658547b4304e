// SPDX-License-Identifier: Apache-2.0

//! Command-line driver: configs in, reports with embedded provenance out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, Format};
pub use error::{CliError, EXIT_IO, EXIT_OK, EXIT_VALIDATION, EXIT_WINDOW};

#[derive(Debug, Parser)]
#[command(
    name = "strata-walk",
    version,
    about = "Recurrence diagnostics and quenched Monte Carlo for walks in stratified random environments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Replaces `environment.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed_override: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, value_name = "N", env = "STRATA_WALK_THREADS")]
    pub threads: Option<usize>,

    /// Restrict tabular outputs to one format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the environment document, a window of strata and the hypothesis checks.
    GenEnv,
    /// Criterion series, dispersion profiles and a verdict.
    Analyze,
    /// Seeded ensemble of quenched walks.
    Simulate,
    /// Verdicts over drift exponents and environment seeds.
    Sweep,
    /// Verify an output directory against its manifest and summarize it.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenEnv => "gen-env",
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

/// Runs one command, writing a short human summary to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = match cli.threads {
        Some(0) => return Err(CliError::validation("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?
            .install(|| commands::dispatch(cli)),
        None => commands::dispatch(cli),
    };
    let (text, result) = match text {
        Ok(t) => (t, Ok(())),
        Err((t, e)) => (t, Err(e)),
    };
    stdout.write_all(text.as_bytes())?;
    result
}
