// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{EnvironmentModel, JumpLaw};
use super::stratum::{unit_step_pmf, Pmf, Stratum};
use crate::error::{Error, Result};
use crate::rng::level_stream;

/// A realized environment. Strata are regenerated on demand from
/// `(seed, n)`; there is no shared mutable cache, so concurrent readers see
/// bit-identical values. Hot loops keep their own local caches.
#[derive(Debug, Clone)]
pub struct EnvironmentView {
    model: Arc<EnvironmentModel>,
    fixed_mu: Option<Pmf>,
}

pub fn build_environment(model: EnvironmentModel) -> Result<EnvironmentView> {
    model.validate()?;
    let fixed_mu = match &model.jump_law {
        JumpLaw::UnitSteps => None,
        JumpLaw::Fixed { atoms } => Some(
            Pmf::new(atoms.iter().map(|a| (a.offset.clone(), a.weight)).collect())
                .map_err(|e| Error::InvalidModel(e.to_string()))?,
        ),
    };
    Ok(EnvironmentView { model: Arc::new(model), fixed_mu })
}

impl EnvironmentView {
    pub fn model(&self) -> &EnvironmentModel {
        &self.model
    }

    pub fn eta(&self) -> f64 {
        self.model.eta
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension
    }

    pub fn stratum(&self, n: i64) -> Stratum {
        let m = &*self.model;
        let mut rng = level_stream(m.seed, n);
        // Always consume three draws in a fixed order so that changing one
        // law leaves the others' realizations untouched.
        let u_ratio: f64 = rng.random();
        let u_r: f64 = rng.random();
        let u_drift: f64 = rng.random();

        let a = m.ratio_law.sample(u_ratio);
        let r = m.r_law.sample(u_r);
        let p = (1.0 - r) / (1.0 + a);
        let q = a * p;

        let (mu, clamped) = match &self.fixed_mu {
            Some(mu) => (mu.clone(), false),
            None => {
                let raw = m.drift_model.raw(n, u_drift);
                let bound = m.drift_bound();
                let eps = raw.clamp(-bound, bound);
                (unit_step_pmf(m.dimension, eps), eps != raw)
            }
        };
        let eps = mu.mean();
        Stratum { n, p, q, r, mu, eps, clamped }
    }

    /// Strata for `lo..=hi`, generated in parallel.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<Stratum> {
        (lo..=hi).into_par_iter().map(|n| self.stratum(n)).collect()
    }

    /// `log a_n` for `lo..=hi`; the cheap path used by table builds.
    pub fn log_ratios(&self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..=hi).into_par_iter().map(|n| self.stratum(n).ratio().ln()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Ellipticity,
    Moment,
    Spectrum,
    /// `d = 1` form of the spectrum condition: `μ(0) ≤ 1 − η`.
    MassAtZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: i64,
    pub kind: ViolationKind,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub eta: f64,
    pub range: (i64, i64),
    pub levels_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violating_levels(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.violations.iter().map(|x| x.n).collect();
        v.dedup();
        v
    }
}

/// Checks one stratum against the uniform ellipticity, moment and spectrum
/// conditions.
pub fn validate_stratum(s: &Stratum, eta: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = s.dimension();
    let tol = 1e-12;
    let min_pqr = s.p.min(s.q).min(s.r);
    if min_pqr < eta - tol {
        out.push(Violation { n: s.n, kind: ViolationKind::Ellipticity, value: min_pqr, bound: eta });
    }
    let moment = s.mu.abs_moment(d.max(3) as f64);
    if moment > 1.0 / eta + tol {
        out.push(Violation { n: s.n, kind: ViolationKind::Moment, value: moment, bound: 1.0 / eta });
    }
    if d == 1 {
        let m0 = s.mu.mass_at(&[0]);
        if m0 > 1.0 - eta + tol {
            out.push(Violation { n: s.n, kind: ViolationKind::MassAtZero, value: m0, bound: 1.0 - eta });
        }
    } else {
        let cov = DMatrix::from_row_slice(d, d, &s.mu.second_moment());
        let lambda_min = cov.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if lambda_min < eta - tol {
            out.push(Violation { n: s.n, kind: ViolationKind::Spectrum, value: lambda_min, bound: eta });
        }
    }
    out
}

pub fn validate_hypothesis(env: &EnvironmentView, n_lo: i64, n_hi: i64) -> Result<ValidationReport> {
    if n_lo > n_hi {
        return Err(Error::InvalidArgument(format!("empty range [{n_lo}, {n_hi}]")));
    }
    let eta = env.eta();
    let violations: Vec<Violation> =
        (n_lo..=n_hi).into_par_iter().flat_map_iter(|n| validate_stratum(&env.stratum(n), eta)).collect();
    Ok(ValidationReport { eta, range: (n_lo, n_hi), levels_checked: (n_hi - n_lo + 1) as usize, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvStats {
    pub levels: usize,
    pub mean_log_a: f64,
    /// Unbiased sample variance of `log a_n`.
    pub var_log_a: f64,
    /// Standard error of `mean_log_a`.
    pub se_mean_log_a: f64,
    pub min_pqr: f64,
    pub max_support: i64,
}

pub fn env_stats(env: &EnvironmentView, n_lo: i64, n_hi: i64) -> Result<EnvStats> {
    if n_lo > n_hi {
        return Err(Error::InvalidArgument(format!("empty range [{n_lo}, {n_hi}]")));
    }
    let strata = env.window(n_lo, n_hi);
    let logs: Vec<f64> = strata.iter().map(|s| s.ratio().ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = if logs.len() > 1 { logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(EnvStats {
        levels: logs.len(),
        mean_log_a: mean,
        var_log_a: var,
        se_mean_log_a: (var / n).sqrt(),
        min_pqr: strata.iter().map(|s| s.p.min(s.q).min(s.r)).fold(f64::INFINITY, f64::min),
        max_support: strata.iter().map(|s| s.mu.max_support()).max().unwrap_or(0),
    })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes strata `lo..=hi` as CSV with columns
/// `n, p, q, r, eps, mu_atoms` (`mu_atoms` = `offset:weight;...`).
pub fn write_window_csv<W: Write>(env: &EnvironmentView, lo: i64, hi: i64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "p", "q", "r", "eps", "mu_atoms"])?;
    for s in env.window(lo, hi) {
        let atoms = s.mu.atoms().iter().map(|(k, wt)| format!("{}:{}", join(k), wt)).collect::<Vec<_>>().join(";");
        w.write_record([s.n.to_string(), s.p.to_string(), s.q.to_string(), s.r.to_string(), join(&s.eps), atoms])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{DriftModel, JumpAtom, RatioLaw};

    #[test]
    fn flat_strata() {
        let env = build_environment(EnvironmentModel::flat(0.1)).unwrap();
        for n in [-3, 0, 17] {
            let s = env.stratum(n);
            for x in [s.p, s.q, s.r] {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
            assert_eq!(s.ratio(), 1.0);
            assert_eq!(s.drift(), 0.0);
            assert_eq!(s.mu.atoms().len(), 2);
        }
        let rep = validate_hypothesis(&env, -50, 50).unwrap();
        assert!(rep.passed());
    }

    #[test]
    fn stretch_exp_strata() {
        let m = EnvironmentModel::sinai(2.0, 0.2, 3);
        let env = build_environment(m.clone().with_drift(DriftModel::stretch_exp(1.0, 0.75))).unwrap();
        assert_eq!(env.stratum(0).drift(), 1.0);
        let env = build_environment(m.with_drift(DriftModel::stretch_exp(1.0, 0.25))).unwrap();
        assert!((env.stratum(16).drift() - (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn clamping_is_recorded() {
        let m = EnvironmentModel::flat(0.25).with_drift(DriftModel::Constant { value: 9.0 });
        let env = build_environment(m).unwrap();
        let s = env.stratum(1);
        assert!(s.clamped);
        // clamped where E|X|³ = 1/η: mass f on 2, 1 - f on 1, 1 + 7f = 4
        assert!((s.drift() - 10.0 / 7.0).abs() < 1e-12);
        assert!((s.mu.abs_moment(3.0) - 4.0).abs() < 1e-12);
        assert!(validate_stratum(&s, 0.25).is_empty());
    }

    #[test]
    fn determinism() {
        let env = build_environment(EnvironmentModel::sinai(2.0, 0.2, 7)).unwrap();
        assert_eq!(env.stratum(5), env.stratum(5));
        let fwd: Vec<Stratum> = (-1000..=1000).map(|n| env.stratum(n)).collect();
        let mut rev: Vec<Stratum> = (-1000..=1000).rev().map(|n| env.stratum(n)).collect();
        rev.reverse();
        assert_eq!(fwd, rev);
        assert_eq!(env.window(-1000, 1000), fwd);
    }

    #[test]
    fn degenerate_jump_laws_fail_validation() {
        let mut m = EnvironmentModel::flat(0.1);
        m.jump_law = JumpLaw::Fixed { atoms: vec![JumpAtom { offset: vec![0], weight: 1.0 }] };
        let env = build_environment(m).unwrap();
        let rep = validate_hypothesis(&env, 0, 3).unwrap();
        assert_eq!(rep.violations.len(), 4);
        assert!(rep.violations.iter().all(|v| v.kind == ViolationKind::MassAtZero));

        let mut m = EnvironmentModel::flat(0.1);
        m.dimension = 2;
        m.jump_law = JumpLaw::Fixed {
            atoms: vec![JumpAtom { offset: vec![1, 0], weight: 0.5 }, JumpAtom { offset: vec![-1, 0], weight: 0.5 }],
        };
        let env = build_environment(m).unwrap();
        let rep = validate_hypothesis(&env, 0, 0).unwrap();
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].kind, ViolationKind::Spectrum);
    }

    #[test]
    fn two_dimensional_unit_steps_pass() {
        let mut m = EnvironmentModel::flat(0.2).with_drift(DriftModel::Constant { value: 0.3 });
        m.dimension = 2;
        let env = build_environment(m).unwrap();
        assert!(validate_hypothesis(&env, -20, 20).unwrap().passed());
        assert!((env.stratum(3).eps[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn biased_mean_log_ratio() {
        let m = EnvironmentModel { ratio_law: RatioLaw::pair(3.0, 0.5), ..EnvironmentModel::flat(0.15) };
        let env = build_environment(m.with_seed(11)).unwrap();
        let st = env_stats(&env, -10_000, 10_000).unwrap();
        let expected = (3f64.ln() - 2f64.ln()) / 2.0;
        assert!((st.mean_log_a - expected).abs() <= 3.0 * st.se_mean_log_a, "{st:?}");
    }

    #[test]
    fn csv_export_columns() {
        let env = build_environment(EnvironmentModel::flat(0.1)).unwrap();
        let mut buf = Vec::new();
        write_window_csv(&env, -1, 1, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "n,p,q,r,eps,mu_atoms");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("0,0.333333333333333"));
        assert!(lines[2].ends_with("1:0.5;-1:0.5"));
    }
}
