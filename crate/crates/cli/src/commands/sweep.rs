// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use strata_walk::analysis::{CriterionReport, Verdict};
use strata_walk::environment::build_environment;
use strata_walk::montecarlo::ensemble;

use super::analyze::analyze_tables;
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McContrast {
    pub median_returns_origin: f64,
    pub mean_returns_origin: f64,
    pub median_returns_vertical: f64,
}

/// One `(env_seed, α)` cell. Failed cells keep the error and no verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub env_seed: u64,
    pub alpha: f64,
    pub verdict: Option<Verdict>,
    pub rule: Option<String>,
    pub window: Option<(usize, usize)>,
    pub grid_k: Option<u64>,
    pub grid_j_max: Option<u32>,
    pub usable_recurrence: usize,
    pub usable_transience: usize,
    pub recurrence_fit_ratio: Option<f64>,
    pub transience_fit_ratio: Option<f64>,
    pub log10_recurrence_sum: Option<f64>,
    pub log10_transience_sum: Option<f64>,
    pub mc: Option<McContrast>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub cells: usize,
    pub transient: usize,
    pub recurrent: usize,
    pub inconclusive: usize,
    pub failed: usize,
    /// Over all cells of this α, failed ones included.
    pub transient_fraction: f64,
    pub recurrent_fraction: f64,
}

fn last_sum(r: &CriterionReport) -> Option<f64> {
    r.rows.iter().rev().find_map(|x| x.partial_sum).map(|s| s.log10_abs())
}

/// Classifies one cell and, when the config has a simulation section, runs
/// the ensemble on the same environment.
pub fn run_cell(cfg: &ExperimentConfig, env_seed: u64, alpha: f64) -> CellResult {
    let mut cell = CellResult {
        env_seed,
        alpha,
        verdict: None,
        rule: None,
        window: None,
        grid_k: None,
        grid_j_max: None,
        usable_recurrence: 0,
        usable_transience: 0,
        recurrence_fit_ratio: None,
        transience_fit_ratio: None,
        log10_recurrence_sum: None,
        log10_transience_sum: None,
        mc: None,
        error: None,
    };
    let sw = cfg.sweep.as_ref().expect("sweep section");
    let model = sw.cell_model(&cfg.environment, env_seed, alpha);
    let a = &cfg.analysis;
    match analyze_tables(&model, a.window, a.grid, a.thresholds) {
        Ok((_, cls)) => {
            let ev = &cls.evidence;
            cell.verdict = Some(cls.verdict);
            cell.rule = Some(cls.rule.clone());
            cell.window = Some(ev.window);
            cell.grid_k = Some(cls.grid.k);
            cell.grid_j_max = Some(cls.grid.j_max);
            cell.usable_recurrence = ev.recurrence.usable_terms().len();
            cell.usable_transience = ev.transience.usable_terms().len();
            cell.recurrence_fit_ratio = ev.recurrence.tail_ratio_fit.map(|f| f.ratio);
            cell.transience_fit_ratio = ev.transience.tail_ratio_fit.map(|f| f.ratio);
            cell.log10_recurrence_sum = last_sum(&ev.recurrence);
            cell.log10_transience_sum = last_sum(&ev.transience);
        }
        Err(e) => {
            cell.error = Some(e.message);
            return cell;
        }
    }
    if let Some(spec) = cfg.simulation {
        let r = build_environment(model).and_then(|env| ensemble(&env, spec, None));
        match r {
            Ok(r) => {
                let ro: f64 = r.walks.iter().map(|w| w.returns_origin as f64).sum();
                cell.mc = Some(McContrast {
                    median_returns_origin: r.aggregates.returns_origin.median,
                    mean_returns_origin: ro / r.walks.len() as f64,
                    median_returns_vertical: r.aggregates.returns_vertical.median,
                });
            }
            Err(e) => cell.error = Some(format!("simulation: {e}")),
        }
    }
    cell
}

pub fn summarize(alphas: &[f64], cells: &[CellResult]) -> Vec<AlphaSummary> {
    alphas
        .iter()
        .map(|&alpha| {
            let col: Vec<&CellResult> = cells.iter().filter(|c| c.alpha == alpha).collect();
            let count = |v: Verdict| col.iter().filter(|c| c.verdict == Some(v)).count();
            let n = col.len();
            let transient = count(Verdict::TransientIndicative);
            let recurrent = count(Verdict::RecurrentIndicative);
            AlphaSummary {
                alpha,
                cells: n,
                transient,
                recurrent,
                inconclusive: count(Verdict::Inconclusive),
                failed: col.iter().filter(|c| c.verdict.is_none()).count(),
                transient_fraction: transient as f64 / n as f64,
                recurrent_fraction: recurrent as f64 / n as f64,
            }
        })
        .collect()
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub(super) fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::validation("config has no sweep section"))?;
    let cells: Vec<(u64, f64)> =
        sw.env_seeds.iter().flat_map(|&s| sw.alpha_grid.iter().map(move |&a| (s, a))).collect();
    let results: Vec<CellResult> = cells.par_iter().map(|&(s, a)| run_cell(cfg, s, a)).collect();
    let summary = summarize(&sw.alpha_grid, &results);

    let mut out = OutDir::open(dir, "sweep", cfg)?;
    if cfg.output.wants(Format::Csv) {
        out.write_csv("phase_table.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record([
                "env_seed",
                "alpha",
                "verdict",
                "rule",
                "n_minus",
                "n_plus",
                "grid_k",
                "grid_j_max",
                "usable_recurrence",
                "usable_transience",
                "recurrence_fit_ratio",
                "transience_fit_ratio",
                "log10_recurrence_sum",
                "log10_transience_sum",
                "mc_median_returns_origin",
                "mc_mean_returns_origin",
                "mc_median_returns_vertical",
                "error",
            ])?;
            for c in &results {
                w.write_record([
                    c.env_seed.to_string(),
                    c.alpha.to_string(),
                    opt(c.verdict.map(Verdict::as_str)),
                    opt(c.rule.as_deref()),
                    opt(c.window.map(|w| w.0)),
                    opt(c.window.map(|w| w.1)),
                    opt(c.grid_k),
                    opt(c.grid_j_max),
                    c.usable_recurrence.to_string(),
                    c.usable_transience.to_string(),
                    opt(c.recurrence_fit_ratio),
                    opt(c.transience_fit_ratio),
                    opt(c.log10_recurrence_sum),
                    opt(c.log10_transience_sum),
                    opt(c.mc.map(|m| m.median_returns_origin)),
                    opt(c.mc.map(|m| m.mean_returns_origin)),
                    opt(c.mc.map(|m| m.median_returns_vertical)),
                    opt(c.error.as_deref()),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json("phase_table.json", json!({ "cells": &results }))?;
    }
    out.write_json("sweep_summary.json", json!({ "alphas": summary }))?;
    out.finish()
}
