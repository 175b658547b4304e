// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde_json::json;
use strata_walk::analysis::{
    build_tables, classify_tables, dominated_variation_estimate, drift_mass_series, half_pipe_diagnostic,
    normalization_profile, write_criterion_csv, Classification, GridSpec, PhiKind, PotentialTables, Thresholds,
    WindowSpec,
};
use strata_walk::environment::{build_environment, EnvironmentModel};
use strata_walk::Error;

use super::{larger_window, outcome};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutDir;

/// The configured grid, or the automatic one, checked against the window.
/// Fails with the window exit code, suggesting a larger window, when the
/// last grid point is out of reach or too few points fit.
pub fn feasible_grid(
    t: &PotentialTables,
    grid: Option<GridSpec>,
    th: &Thresholds,
    window: WindowSpec,
) -> Result<GridSpec, CliError> {
    let suggest = |e: CliError| e.with_payload(json!({ "suggested_window": larger_window(window) }));
    let g = match grid {
        Some(g) => g,
        None => GridSpec::auto(t).map_err(|e| suggest(e.into()))?,
    };
    match t.levels_at(g.scale(g.j_max)) {
        Err(e @ Error::OutOfWindow { .. }) => {
            return Err(suggest(CliError::window(format!(
                "grid point K^{} = e^{:.3}: {e}",
                g.j_max,
                g.scale(g.j_max).lmag()
            ))))
        }
        Err(e) => return Err(e.into()),
        Ok(_) => {}
    }
    if (g.j_max as usize) < th.min_points {
        return Err(suggest(CliError::window(format!(
            "window supports {} grid points, fewer than min_points = {}",
            g.j_max, th.min_points
        ))));
    }
    Ok(g)
}

/// Tables, grid and classification for one environment.
pub fn analyze_tables(
    model: &EnvironmentModel,
    window: WindowSpec,
    grid: Option<GridSpec>,
    th: Thresholds,
) -> Result<(PotentialTables, Classification), CliError> {
    let env = build_environment(model.clone())?;
    let (nm, np) = window.resolve(&env)?;
    let t = build_tables(&env, nm, np)?;
    let g = feasible_grid(&t, grid, &th, window)?;
    let cls = classify_tables(&t, !model.is_biased(), Some(g), th)?;
    Ok((t, cls))
}

pub(super) fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let a = &cfg.analysis;
    let (t, cls) = analyze_tables(&cfg.environment, a.window, a.grid, a.thresholds)?;
    let mut out = OutDir::open(dir, "analyze", cfg)?;

    let mut evidence = Vec::new();
    if cfg.output.wants(Format::Csv) {
        out.write_csv("series.csv", |buf| {
            Ok(write_criterion_csv(&t, &cls.evidence.recurrence, &cls.evidence.transience, buf)?)
        })?;
        out.write_csv("phi_table.csv", |buf| write_level_table(&t, buf))?;
        evidence.extend(["series.csv", "phi_table.csv"]);
    }
    if cfg.output.wants(Format::Json) {
        let g = cls.grid;
        let dv: Vec<_> = [PhiKind::Phi, PhiKind::PhiPlus, PhiKind::PhiStr]
            .into_iter()
            .map(|k| json!({ "which": k.name(), "estimate": outcome(dominated_variation_estimate(&t, k, g)) }))
            .collect();
        out.write_json(
            "series.json",
            json!({
                "classification": &cls,
                "diagnostics": {
                    "drift_mass": outcome(drift_mass_series(&t, g, a.thresholds)),
                    "half_pipe": half_pipe_diagnostic(&t),
                    "dominated_variation": dv,
                    "normalization": outcome(normalization_profile(&t, g)),
                    "invariants": t.check_invariants(),
                },
            }),
        )?;
        evidence.push("series.json");
    }
    let (nm, np) = cls.evidence.window;
    out.write_json(
        "verdict.json",
        json!({
            "label": cls.verdict,
            "rule": &cls.rule,
            "window": { "n_minus": nm, "n_plus": np },
            "grid": cls.grid,
            "thresholds": cls.thresholds,
            "series_verdicts": {
                "recurrence": cls.evidence.recurrence.verdict,
                "transience": cls.evidence.transience.verdict,
            },
            "evidence": evidence,
        }),
    )?;
    out.finish()
}

/// One row per tabulated level: `log10 ρ_k` and the side's scale functions
/// `v`, `w` reaching level `k`.
fn write_level_table(t: &PotentialTables, buf: &mut Vec<u8>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["level", "log10_rho", "log10_v", "log10_w"])?;
    let (lo, hi) = t.window();
    let (vp, wp, vm, wm) = (t.v_plus(), t.w_plus(), t.v_minus(), t.w_minus());
    for k in lo..=hi {
        let (v, ww) =
            if k >= 0 { (vp[k as usize], wp[k as usize]) } else { (vm[(-k - 1) as usize], wm[(-k - 1) as usize]) };
        w.write_record([
            k.to_string(),
            format!("{:.12}", t.log_rho(k) / std::f64::consts::LN_10),
            format!("{:.12}", v.log10_abs()),
            format!("{:.12}", ww.log10_abs()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
