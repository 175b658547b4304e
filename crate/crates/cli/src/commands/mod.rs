// SPDX-License-Identifier: Apache-2.0

mod analyze;
mod gen_env;
mod report;
mod simulate;
mod sweep;

use std::fmt::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};
use strata_walk::analysis::WindowSpec;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::{Cli, Command};

pub use analyze::{analyze_tables, feasible_grid};
pub use report::{verify, Verification};
pub use sweep::{run_cell, summarize, AlphaSummary, CellResult, McContrast};

/// Runs the command; stdout text is returned alongside the outcome.
pub(crate) fn dispatch(cli: &Cli) -> Result<String, (String, CliError)> {
    if cli.command == Command::Report {
        let mut text = Vec::new();
        let r = report::run(cli, &mut text);
        let text = String::from_utf8(text).expect("utf-8 report");
        return match r {
            Ok(()) => Ok(text),
            Err(e) => Err((text, e)),
        };
    }
    run_writer(cli).map_err(|e| (String::new(), e))
}

fn run_writer(cli: &Cli) -> Result<String, CliError> {
    let cfg = effective_config(cli)?;
    let dir = out_dir(cli, &cfg)?;
    let written = match cli.command {
        Command::GenEnv => gen_env::run(&cfg, &dir)?,
        Command::Analyze => analyze::run(&cfg, &dir)?,
        Command::Simulate => simulate::run(&cfg, &dir)?,
        Command::Sweep => sweep::run(&cfg, &dir)?,
        Command::Report => unreachable!(),
    };
    let mut text = String::new();
    for p in written {
        writeln!(text, "wrote {}", p.display()).expect("string write");
    }
    Ok(text)
}

/// The config file with command-line overrides applied, validated.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::validation("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed_override {
        cfg.environment.seed = seed;
    }
    if let Some(f) = cli.format {
        cfg.output.formats = vec![f];
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cli.out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CliError::validation("no output directory: pass --out or set output.dir"))
}

/// Window that would resolve the failed query, as an error payload.
pub(crate) fn larger_window(w: WindowSpec) -> Value {
    match w {
        WindowSpec::Balanced { levels } => json!({ "levels": levels.saturating_mul(2) }),
        WindowSpec::Explicit { n_minus, n_plus } => {
            json!({ "n_minus": n_minus.saturating_mul(2), "n_plus": n_plus.saturating_mul(2) })
        }
    }
}

/// `Ok` values as themselves, errors as `{"error": message}`.
pub(crate) fn outcome<T: Serialize>(r: strata_walk::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}
