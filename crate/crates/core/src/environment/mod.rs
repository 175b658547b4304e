// SPDX-License-Identifier: Apache-2.0

//! Stratified environments: per-level transition data `(p_n, q_n, r_n, μ_n)`
//! generated lazily and deterministically from `(seed, n)`.

mod model;
mod stratum;
mod view;

pub use model::{DriftModel, EnvironmentModel, JumpAtom, JumpLaw, RLaw, RatioAtom, RatioLaw, SignPattern};
pub use stratum::{Pmf, Stratum};
pub use view::{
    build_environment, env_stats, validate_hypothesis, validate_stratum, write_window_csv, EnvStats, EnvironmentView,
    ValidationReport, Violation, ViolationKind,
};
