// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde_json::json;
use strata_walk::environment::{build_environment, env_stats, validate_hypothesis, write_window_csv};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::OutDir;

/// Violating levels quoted in the error message; the file lists all.
const QUOTED_LEVELS: usize = 20;

pub(super) fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let env = build_environment(cfg.environment.clone())?;
    let (nm, np) = cfg.analysis.window.resolve(&env)?;
    let (lo, hi) = (-(nm as i64), np as i64);
    let report = validate_hypothesis(&env, lo, hi)?;
    let stats = env_stats(&env, lo, hi)?;

    let mut out = OutDir::open(dir, "gen-env", cfg)?;
    out.write_json("environment.json", json!({ "environment": &cfg.environment, "window": [lo, hi], "stats": stats }))?;
    out.write_csv("window.csv", |buf| Ok(write_window_csv(&env, lo, hi, buf)?))?;
    let levels = report.violating_levels();
    out.write_json(
        "validation.json",
        json!({ "passed": report.passed(), "violating_levels": &levels, "report": &report }),
    )?;
    let written = out.finish()?;
    if !report.passed() {
        let quoted: Vec<String> = levels.iter().take(QUOTED_LEVELS).map(|n| n.to_string()).collect();
        let more = if levels.len() > QUOTED_LEVELS {
            format!(" and {} more", levels.len() - QUOTED_LEVELS)
        } else {
            String::new()
        };
        return Err(CliError::validation(format!("hypothesis checks failed at levels {}{more}", quoted.join(", ")))
            .with_payload(json!({ "violating_levels": levels })));
    }
    Ok(written)
}
