// SPDX-License-Identifier: Apache-2.0

//! Aggregate verdict over the criterion series.
//!
//! On a centered landscape the raw series are dominated by valley stalls:
//! across a deep valley `Φ` jumps, its inverses freeze, and the terms fall
//! by `1/K` per grid step whether or not a drift is present. The drift-free
//! walk on the same landscape is recurrent, so when the environment is
//! centered the series are also compared term by term with that baseline,
//! which removes the landscape from the comparison. Without drift the
//! environment is its own baseline.
//!
//! Rules, first match wins:
//!
//! 1. transience series fitted convergent: transient;
//! 2. centered: `Φ⁰(K^j)/Φ(K^j) < θ_rec` at every tail point
//!    (the drift dominates the dispersion): transient;
//! 3. recurrence series terms persist: recurrent;
//! 4. centered: the recurrence terms reach `θ_rec` times the
//!    baseline terms somewhere in the tail: recurrent;
//! 5. recurrence series fitted convergent: transient;
//! 6. otherwise inconclusive.

use serde::{Deserialize, Serialize};

use super::diagnostics::{structure_condition, StructureRow};
use super::series::{
    recurrence_series, terms_persist, transience_series, CriterionReport, GridSpec, Thresholds, Verdict,
};
use super::tables::{balanced_window, build_tables, PotentialTables};
use crate::environment::EnvironmentView;
use crate::error::Result;
use crate::numerics::SignedLog;

/// Margin used for the structure profile in the evidence bundle.
const STRUCTURE_EPSILON: f64 = 0.1;

/// Level window for an analysis: a total budget split by
/// [`balanced_window`], or explicit side lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum WindowSpec {
    Explicit { n_minus: usize, n_plus: usize },
    Balanced { levels: usize },
}

impl WindowSpec {
    pub fn resolve(&self, env: &EnvironmentView) -> Result<(usize, usize)> {
        match *self {
            WindowSpec::Explicit { n_minus, n_plus } => Ok((n_minus, n_plus)),
            WindowSpec::Balanced { levels } => balanced_window(env, levels),
        }
    }
}

/// Per-grid-point comparison with the drift-free landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub j: u32,
    /// `Φ⁰(K^j) / Φ(K^j)`.
    pub transience_ratio: Option<SignedLog>,
    /// `t_j / t⁰_j` for the recurrence series.
    pub recurrence_ratio: Option<SignedLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub window: (usize, usize),
    pub recurrence: CriterionReport,
    pub transience: CriterionReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline: Option<Vec<BaselineRow>>,
    pub structure: Vec<StructureRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Name of the rule that produced the verdict.
    pub rule: String,
    pub thresholds: Thresholds,
    pub grid: GridSpec,
    pub evidence: Evidence,
}

pub fn classify(
    env: &EnvironmentView,
    window: WindowSpec,
    grid: Option<GridSpec>,
    th: Thresholds,
) -> Result<Classification> {
    let (nm, np) = window.resolve(env)?;
    let t = build_tables(env, nm, np)?;
    let centered = !env.model().is_biased();
    classify_tables(&t, centered, grid, th)
}

/// [`classify`] on prebuilt tables. `centered` enables the baseline rules.
pub fn classify_tables(
    t: &PotentialTables,
    centered: bool,
    grid: Option<GridSpec>,
    th: Thresholds,
) -> Result<Classification> {
    let grid = match grid {
        Some(g) => {
            g.validate_for(t.eta())?;
            g
        }
        None => GridSpec::auto(t)?,
    };
    let rec = recurrence_series(t, grid, th)?;
    let trans = transience_series(t, grid, th)?;
    let baseline = if !centered {
        None
    } else if t.has_drift() {
        let t0 = t.without_drift();
        let rec0 = recurrence_series(&t0, grid, th)?;
        let trans0 = transience_series(&t0, grid, th)?;
        Some(baseline_rows(&rec, &trans, &rec0, &trans0))
    } else {
        Some(baseline_rows(&rec, &trans, &rec, &trans))
    };

    let (verdict, rule) = decide(&rec, &trans, baseline.as_deref(), &th);
    let structure = structure_condition(t, STRUCTURE_EPSILON, grid)?;
    Ok(Classification {
        verdict,
        rule: rule.to_string(),
        thresholds: th,
        grid,
        evidence: Evidence { window: t.sides(), recurrence: rec, transience: trans, baseline, structure },
    })
}

fn baseline_rows(
    rec: &CriterionReport,
    trans: &CriterionReport,
    rec0: &CriterionReport,
    trans0: &CriterionReport,
) -> Vec<BaselineRow> {
    // transience terms are K^j/Φ, so their ratio is Φ⁰/Φ
    let ratio = |a: Option<SignedLog>, b: Option<SignedLog>| match (a, b) {
        (Some(x), Some(y)) if x.is_positive() && y.is_positive() => Some(x.div(y)),
        _ => None,
    };
    rec.rows
        .iter()
        .zip(&trans.rows)
        .zip(rec0.rows.iter().zip(&trans0.rows))
        .map(|((r, s), (r0, s0))| BaselineRow {
            j: r.j,
            transience_ratio: ratio(s.term, s0.term),
            recurrence_ratio: ratio(r.term, r0.term),
        })
        .collect()
}

/// Second half (at least `min_points`) of the defined values.
fn tail<T: Copy>(vals: &[T], min_points: usize) -> &[T] {
    let take = (vals.len() / 2).max(min_points).min(vals.len());
    &vals[vals.len() - take..]
}

fn decide(
    rec: &CriterionReport,
    trans: &CriterionReport,
    baseline: Option<&[BaselineRow]>,
    th: &Thresholds,
) -> (Verdict, &'static str) {
    let fit_converges =
        |r: &CriterionReport| r.tail_ratio_fit.is_some_and(|f| f.ratio < th.theta_trans && f.ratio_se < th.max_fit_se);
    let enough = |n: usize| n >= th.min_points;
    let theta = SignedLog::from_real(th.theta_rec);

    let trans_terms = trans.usable_terms();
    if enough(trans_terms.len()) && fit_converges(trans) {
        return (Verdict::TransientIndicative, "transience-series");
    }
    if let Some(rows) = baseline {
        let shares: Vec<SignedLog> = rows.iter().filter_map(|r| r.transience_ratio).collect();
        if enough(shares.len()) && tail(&shares, th.min_points).iter().all(|s| *s < theta) {
            return (Verdict::TransientIndicative, "drift-dominance");
        }
    }
    let rec_terms = rec.usable_terms();
    if enough(rec_terms.len()) && terms_persist(&rec_terms, th) {
        return (Verdict::RecurrentIndicative, "recurrence-series");
    }
    if let Some(rows) = baseline {
        let rel: Vec<SignedLog> = rows.iter().filter_map(|r| r.recurrence_ratio).collect();
        if enough(rel.len()) && tail(&rel, th.min_points).iter().any(|s| *s >= theta) {
            return (Verdict::RecurrentIndicative, "baseline-recurrence");
        }
    }
    if enough(rec_terms.len()) && fit_converges(rec) {
        return (Verdict::TransientIndicative, "recurrence-series-fit");
    }
    (Verdict::Inconclusive, "none")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, DriftModel, EnvironmentModel};

    fn run(m: EnvironmentModel, levels: usize) -> Classification {
        let env = build_environment(m).unwrap();
        classify(&env, WindowSpec::Balanced { levels }, None, Thresholds::default()).unwrap()
    }

    #[test]
    fn flat_models() {
        let c = run(EnvironmentModel::flat(1.0 / 3.0), 140_000);
        assert_eq!(c.verdict, Verdict::RecurrentIndicative);
        assert_eq!(c.rule, "recurrence-series");
        // no drift: the environment is its own baseline
        assert!(c
            .evidence
            .baseline
            .as_ref()
            .unwrap()
            .iter()
            .all(|r| r.transience_ratio.is_none_or(|x| x == SignedLog::ONE)));

        let c = run(EnvironmentModel::flat(1.0 / 3.0).with_drift(DriftModel::Constant { value: 0.5 }), 140_000);
        assert_eq!(c.verdict, Verdict::TransientIndicative);
        assert_eq!(c.rule, "transience-series");
    }

    #[test]
    fn drift_exponent_split_on_seed_zero() {
        let sinai = |alpha: f64| EnvironmentModel::sinai(2.0, 0.2, 0).with_drift(DriftModel::stretch_exp(1.0, alpha));
        let c = run(sinai(0.25), 100_000);
        assert_eq!(c.verdict, Verdict::TransientIndicative);
        let c = run(sinai(0.75), 100_000);
        assert_eq!(c.verdict, Verdict::RecurrentIndicative);
        let c = run(EnvironmentModel::sinai(2.0, 0.2, 0), 100_000);
        assert_eq!(c.verdict, Verdict::RecurrentIndicative);
    }

    #[test]
    fn explicit_grid_is_checked_against_eta() {
        let env = build_environment(EnvironmentModel::flat(0.2)).unwrap();
        let w = WindowSpec::Explicit { n_minus: 1000, n_plus: 1000 };
        let bad = GridSpec::new(10, 2).unwrap();
        assert!(classify(&env, w, Some(bad), Thresholds::default()).is_err());
        let c = classify(&env, w, Some(GridSpec::new(13, 2).unwrap()), Thresholds::default()).unwrap();
        // two grid points are below min_points
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert_eq!(c.rule, "none");
    }

    #[test]
    fn window_spec_json_forms() {
        let b: WindowSpec = serde_json::from_str(r#"{"levels": 500}"#).unwrap();
        assert_eq!(b, WindowSpec::Balanced { levels: 500 });
        let e: WindowSpec = serde_json::from_str(r#"{"n_minus": 3, "n_plus": 4}"#).unwrap();
        assert_eq!(e, WindowSpec::Explicit { n_minus: 3, n_plus: 4 });
    }
}
