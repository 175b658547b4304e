// SPDX-License-Identifier: Apache-2.0

//! Ensembles of independent walks in one environment.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::walk::{return_checkpoints, run_vertical, run_walk, WalkStats};
use crate::environment::EnvironmentView;
use crate::error::{Error, Result};
use crate::rng::{walk_seed, walk_stream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    #[default]
    Full,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub walks: usize,
    pub steps: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub record_trace: bool,
    #[serde(default)]
    pub mode: WalkMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles of a nonempty sample.
    pub fn of(values: &[f64]) -> Quantiles {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let x = p * (v.len() - 1) as f64;
            let (i, f) = (x.floor() as usize, x.fract());
            if i + 1 < v.len() {
                v[i] + f * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Quantiles { min: v[0], q25: q(0.25), median: q(0.5), q75: q(0.75), max: v[v.len() - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAggregates {
    pub returns_origin: Quantiles,
    pub returns_vertical: Quantiles,
    /// `max_i |final_h_i|`.
    pub displacement: Quantiles,
    pub final_v: Quantiles,
    pub max_abs_v: Quantiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub env_seed: u64,
    pub spec: EnsembleSpec,
    pub walk_seeds: Vec<u64>,
    pub walks: Vec<WalkStats>,
    pub aggregates: EnsembleAggregates,
    /// `(t, mean cumulative returns to the origin by time t)`.
    pub return_curve: Vec<(u64, f64)>,
}

/// Runs `spec.walks` walks. Walk `i` uses the seed derived from
/// `(base_seed, i)`, and results are collected in walk order, so the output
/// does not depend on `threads`.
pub fn ensemble(env: &EnvironmentView, spec: EnsembleSpec, threads: Option<usize>) -> Result<EnsembleResult> {
    if spec.walks < 1 {
        return Err(Error::InvalidArgument("an ensemble needs at least one walk".into()));
    }
    if spec.steps < 1 {
        return Err(Error::InvalidArgument("walks need at least one step".into()));
    }
    let seeds: Vec<u64> = (0..spec.walks as u64).map(|i| walk_seed(spec.base_seed, i)).collect();
    let run = |&seed: &u64| {
        let mut rng = walk_stream(seed);
        match spec.mode {
            WalkMode::Full => run_walk(env, spec.steps, &mut rng, spec.record_trace),
            WalkMode::Vertical => run_vertical(env, spec.steps, &mut rng),
        }
    };
    let walks: Vec<WalkStats> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| seeds.par_iter().map(run).collect()),
        None => seeds.par_iter().map(run).collect(),
    };
    Ok(assemble(env.model().seed, spec, seeds, walks))
}

/// Wraps walks already run into an ensemble result.
pub fn assemble(env_seed: u64, spec: EnsembleSpec, walk_seeds: Vec<u64>, walks: Vec<WalkStats>) -> EnsembleResult {
    let col = |f: &dyn Fn(&WalkStats) -> f64| Quantiles::of(&walks.iter().map(f).collect::<Vec<_>>());
    let aggregates = EnsembleAggregates {
        returns_origin: col(&|w| w.returns_origin as f64),
        returns_vertical: col(&|w| w.returns_vertical as f64),
        displacement: col(&|w| w.displacement() as f64),
        final_v: col(&|w| w.final_v as f64),
        max_abs_v: col(&|w| w.max_abs_v as f64),
    };
    let m = walks.len() as f64;
    let return_curve = return_checkpoints(spec.steps)
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, walks.iter().map(|w| w.return_curve[i] as f64).sum::<f64>() / m))
        .collect();
    EnsembleResult { env_seed, spec, walk_seeds, walks, aggregates, return_curve }
}

/// One row per walk.
pub fn write_ensemble_csv<W: Write>(r: &EnsembleResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "walk_seed",
        "returns_origin",
        "returns_vertical",
        "last_return_t",
        "max_abs_v",
        "final_h",
        "final_v",
    ])?;
    for (seed, s) in r.walk_seeds.iter().zip(&r.walks) {
        let h: Vec<String> = s.final_h.iter().map(|x| x.to_string()).collect();
        w.write_record([
            seed.to_string(),
            s.returns_origin.to_string(),
            s.returns_vertical.to_string(),
            s.last_return_t.to_string(),
            s.max_abs_v.to_string(),
            h.join(";"),
            s.final_v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregates and the return curve, without per-walk rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary<'a> {
    pub env_seed: u64,
    pub spec: EnsembleSpec,
    pub walk_seeds: &'a [u64],
    pub aggregates: &'a EnsembleAggregates,
    pub return_curve: &'a [(u64, f64)],
}

impl EnsembleResult {
    pub fn summary(&self) -> EnsembleSummary<'_> {
        EnsembleSummary {
            env_seed: self.env_seed,
            spec: self.spec,
            walk_seeds: &self.walk_seeds,
            aggregates: &self.aggregates,
            return_curve: &self.return_curve,
        }
    }
}
