// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use strata_walk::analysis::{GridSpec, Thresholds, WindowSpec};
use strata_walk::environment::{build_environment, DriftModel, EnvironmentModel, SignPattern};
use strata_walk::montecarlo::EnsembleSpec;

use crate::error::CliError;

/// Level budget used when the config leaves the window out.
pub const DEFAULT_WINDOW_LEVELS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentModel,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "OutputConfig::is_default")]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_window")]
    pub window: WindowSpec,
    /// Grid `K^j, j = 1..=j_max`; chosen from the window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_window() -> WindowSpec {
    WindowSpec::Balanced { levels: DEFAULT_WINDOW_LEVELS }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { window: default_window(), grid: None, thresholds: Thresholds::default() }
    }
}

/// Phase sweep over stretched-exponential drifts `c · exp(-|n|^α)` on the
/// configured landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha_grid: Vec<f64>,
    pub env_seeds: Vec<u64>,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub sign_pattern: SignPattern,
}

fn one() -> f64 {
    1.0
}

impl SweepConfig {
    pub fn cell_model(&self, base: &EnvironmentModel, seed: u64, alpha: f64) -> EnvironmentModel {
        base.clone().with_seed(seed).with_drift(DriftModel::StretchExp {
            c: self.c,
            alpha,
            sign_pattern: self.sign_pattern,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: all_formats() }
    }
}

impl OutputConfig {
    fn is_default(&self) -> bool {
        *self == OutputConfig::default()
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every seed, grid and section before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        build_environment(self.environment.clone())?;
        let eta = self.environment.eta;
        match self.analysis.window {
            WindowSpec::Balanced { levels } if levels < 2 => {
                return Err(CliError::validation("analysis window needs at least 2 levels"))
            }
            WindowSpec::Explicit { n_minus, n_plus } if n_minus < 1 || n_plus < 1 => {
                return Err(CliError::validation("analysis window sides must be at least 1"))
            }
            _ => {}
        }
        if let Some(g) = self.analysis.grid {
            GridSpec::new(g.k, g.j_max)?.validate_for(eta)?;
        }
        let th = &self.analysis.thresholds;
        if !(th.theta_trans > 0.0 && th.theta_rec > 0.0 && th.max_fit_se > 0.0 && th.min_points >= 2) {
            return Err(CliError::validation("thresholds must be positive and min_points at least 2"));
        }
        if let Some(s) = &self.simulation {
            if s.walks < 1 || s.steps < 1 {
                return Err(CliError::validation("simulation needs at least one walk of at least one step"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.alpha_grid.is_empty() {
                return Err(CliError::validation("sweep.alpha_grid is empty"));
            }
            if s.env_seeds.is_empty() {
                return Err(CliError::validation("sweep.env_seeds is empty"));
            }
            for &alpha in &s.alpha_grid {
                for &seed in &s.env_seeds {
                    build_environment(s.cell_model(&self.environment, seed, alpha))?;
                }
            }
        }
        if self.output.formats.is_empty() {
            return Err(CliError::validation("output.formats is empty"));
        }
        Ok(())
    }

    /// The config with the output section cleared. Output placement does
    /// not change any result, so it stays out of the hash.
    pub fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig { output: OutputConfig::default(), ..self.clone() }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical()).expect("config serializes") + "\n"
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"{"environment": {"dimension": 1, "eta": 0.2,
        "ratio_law": {"type": "constant", "value": 1.0},
        "r_law": {"type": "constant", "value": 0.3333333333333333},
        "drift_model": {"type": "zero"}, "seed": 7}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(FLAT).unwrap();
        assert_eq!(c.analysis.window, WindowSpec::Balanced { levels: DEFAULT_WINDOW_LEVELS });
        assert!(c.output.wants(Format::Csv) && c.output.wants(Format::Json));
        assert!(c.simulation.is_none());
    }

    #[test]
    fn round_trip_is_identical() {
        let c = ExperimentConfig::from_json(FLAT).unwrap();
        let once = serde_json::to_string(&c).unwrap();
        let again = serde_json::to_string(&ExperimentConfig::from_json(&once).unwrap()).unwrap();
        assert_eq!(once, again);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = FLAT.replacen("\"seed\": 7", "\"seed\": 7, \"sede\": 1", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = FLAT.replacen("}}", "}, \"analysis\": {\"window\": {\"levels\": 10, \"extra\": 1}}}", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn output_dir_does_not_change_hash() {
        let a = ExperimentConfig::from_json(FLAT).unwrap();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        b.output.formats = vec![Format::Json];
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { environment: a.environment.clone().with_seed(8), ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn infeasible_eta_rejected() {
        let bad = FLAT.replace("\"eta\": 0.2", "\"eta\": 0.4").replace("0.3333333333333333", "0.3");
        let e = ExperimentConfig::from_json(&bad).unwrap_err();
        assert_eq!(e.code, crate::error::EXIT_VALIDATION);
    }

    #[test]
    fn empty_sweep_seeds_rejected() {
        let bad = FLAT.replacen("}}", "}, \"sweep\": {\"alpha_grid\": [0.25], \"env_seeds\": []}}", 1);
        assert_eq!(ExperimentConfig::from_json(&bad).unwrap_err().code, crate::error::EXIT_VALIDATION);
    }
}
