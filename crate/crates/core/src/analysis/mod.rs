// SPDX-License-Identifier: Apache-2.0

//! Potential, scale functions, dispersion functions and criterion series.

mod classify;
mod diagnostics;
mod inverse;
mod phi;
mod pieces;
mod series;
mod tables;

pub use classify::{classify, classify_tables, BaselineRow, Classification, Evidence, WindowSpec};
pub use diagnostics::{
    dominated_variation_at, dominated_variation_estimate, dominated_variation_stability, dv_probe_grid,
    half_pipe_diagnostic, inverse_domain, log_log_slope, normalization_profile, psi_inverse, running_max_w_over_v,
    structure_at_largest, structure_condition, DvEstimate, DvPoint, DvStability, HalfPipeReport, InvariantReport,
    NormalizationRow, StructureRow, HALF_PIPE_TAIL_SHARE,
};
pub use inverse::{drift_mass_inverse, generalized_inverse, phi_inverse, PhiKind};
pub use phi::{
    drift_mass, phi_brute, phi_brute_capped, phi_brute_levels, phi_plus, phi_range, phi_str, phi_sym, psi,
    BRUTE_FORCE_CAP,
};
pub use series::{
    default_grid_base, drift_mass_series, grid_profile, recurrence_series, tail_fit, transience_series,
    write_criterion_csv, CriterionReport, DriftMassReport, GridProfileRow, GridSpec, SeriesKind, TailFit, TermRow,
    Thresholds, Verdict,
};
pub use tables::{balanced_window, build_tables, PotentialTables, MAX_WINDOW_LEVELS};
