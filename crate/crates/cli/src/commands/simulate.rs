// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde_json::json;
use strata_walk::environment::build_environment;
use strata_walk::montecarlo::{ensemble, excursion_summary, write_ensemble_csv, WalkMode, WalkStats};

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutDir;

pub(super) fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.simulation.ok_or_else(|| CliError::validation("config has no simulation section"))?;
    let env = build_environment(cfg.environment.clone())?;
    // threads come from the enclosing pool
    let r = ensemble(&env, spec, None)?;
    let mut out = OutDir::open(dir, "simulate", cfg)?;

    if cfg.output.wants(Format::Csv) {
        out.write_csv("ensemble.csv", |buf| Ok(write_ensemble_csv(&r, buf)?))?;
        out.write_csv("return_curve.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["t", "mean_returns_origin"])?;
            for (t, m) in &r.return_curve {
                w.write_record([t.to_string(), m.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    if cfg.output.wants(Format::Json) {
        let walks: Vec<WalkStats> = r.walks.iter().map(|w| WalkStats { excursions: None, ..w.clone() }).collect();
        out.write_json("ensemble.json", json!({ "summary": r.summary(), "walks": walks }))?;
    }
    if spec.record_trace && spec.mode == WalkMode::Full {
        out.write_json("excursions.json", json!({ "summary": excursion_summary(&r)? }))?;
    }
    out.finish()
}
