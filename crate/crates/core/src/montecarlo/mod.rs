// SPDX-License-Identifier: Apache-2.0

//! Quenched Monte Carlo: the walk on `ℤ^d × ℤ`, the vertical chain, and
//! seeded ensembles.
//!
//! Desk-scale runs cannot certify recurrence or transience (Sinai-type
//! returns live on `(log t)²` scales); these statistics are contrast
//! diagnostics for the analytic verdicts.

mod ensemble;
mod excursion;
mod walk;

pub use ensemble::{
    assemble, ensemble, write_ensemble_csv, EnsembleAggregates, EnsembleResult, EnsembleSpec, EnsembleSummary,
    Quantiles, WalkMode,
};
pub use excursion::{excursion_summary, ks_distance, ExcursionSummary, HalfSplitTest, MIN_EXCURSIONS};
pub use walk::{return_checkpoints, run_vertical, run_walk, step, ExcursionStats, WalkState, WalkStats};
