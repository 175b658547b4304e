// SPDX-License-Identifier: Apache-2.0

//! Environment model documents: laws of `a_n = q_n/p_n`, of `r_n`, of the
//! local drift `ε_n`, and of the horizontal jump law `μ_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioAtom {
    pub value: f64,
    pub prob: f64,
}

/// Law of the ratio `a_n = q_n / p_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatioLaw {
    Constant { value: f64 },
    Atoms { atoms: Vec<RatioAtom> },
}

impl RatioLaw {
    /// Log-symmetric two-point law `{a, 1/a}` with equal weights.
    pub fn two_point(a: f64) -> Self {
        RatioLaw::Atoms { atoms: vec![RatioAtom { value: a, prob: 0.5 }, RatioAtom { value: 1.0 / a, prob: 0.5 }] }
    }

    /// Two atoms with equal weights and no symmetry requirement.
    pub fn pair(a: f64, b: f64) -> Self {
        RatioLaw::Atoms { atoms: vec![RatioAtom { value: a, prob: 0.5 }, RatioAtom { value: b, prob: 0.5 }] }
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            RatioLaw::Constant { value } => vec![(*value, 1.0)],
            RatioLaw::Atoms { atoms } => atoms.iter().map(|a| (a.value, a.prob)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let atoms = self.atoms();
        if atoms.is_empty() {
            return Err(Error::InvalidModel("ratio_law has no atoms".into()));
        }
        for &(v, w) in &atoms {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("ratio value {v} must be positive")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidModel(format!("ratio weight {w} must be positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > LAW_TOL {
            return Err(Error::InvalidModel(format!("ratio weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn support_bounds(&self) -> (f64, f64) {
        let atoms = self.atoms();
        let lo = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        let hi = atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// `E log a` computed from the law.
    pub fn mean_log(&self) -> f64 {
        self.atoms().iter().map(|&(v, w)| w * v.ln()).sum()
    }

    /// `Var log a` computed from the law.
    pub fn var_log(&self) -> f64 {
        let m = self.mean_log();
        self.atoms().iter().map(|&(v, w)| w * (v.ln() - m).powi(2)).sum()
    }

    /// True when the law is log-symmetric: every atom `(a, w)` is matched by
    /// an atom `(1/a, w)`. Such laws have `E log a = 0` exactly.
    pub fn is_centered(&self) -> bool {
        let mut logs: Vec<(f64, f64)> = self.atoms().iter().map(|&(v, w)| (v.ln(), w)).collect();
        logs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let n = logs.len();
        (0..n).all(|i| {
            let (l, w) = logs[i];
            let (l2, w2) = logs[n - 1 - i];
            (l + l2).abs() <= LAW_TOL && (w - w2).abs() <= LAW_TOL
        })
    }

    pub fn is_constant(&self) -> bool {
        let (lo, hi) = self.support_bounds();
        lo == hi
    }

    pub(crate) fn sample(&self, u: f64) -> f64 {
        match self {
            RatioLaw::Constant { value } => *value,
            RatioLaw::Atoms { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.prob;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms[atoms.len() - 1].value
            }
        }
    }
}

/// Law of the horizontal step probability `r_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RLaw {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl RLaw {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            RLaw::Constant { value } => (value, value),
            RLaw::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub(crate) fn sample(&self, u: f64) -> f64 {
        match *self {
            RLaw::Constant { value } => value,
            RLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    /// `ε_n > 0` everywhere.
    #[default]
    Positive,
    Negative,
    /// `(-1)^n`.
    Alternating,
    /// `sign(n)`, zero at the origin.
    Antisymmetric,
}

impl SignPattern {
    fn sign(self, n: i64) -> f64 {
        match self {
            SignPattern::Positive => 1.0,
            SignPattern::Negative => -1.0,
            SignPattern::Alternating => {
                if n.rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            SignPattern::Antisymmetric => n.signum() as f64,
        }
    }
}

/// Law of the local drift `ε_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftModel {
    Zero,
    Constant {
        value: f64,
    },
    /// `ε_n = c · sign(n) · exp(-|n|^alpha)`.
    StretchExp {
        c: f64,
        alpha: f64,
        #[serde(default)]
        sign_pattern: SignPattern,
    },
    /// `ε_n = c · s(n) · U`, `U` uniform on `[-1, 1]`, with
    /// `s(n) = exp(-|n|^(1/2 - delta))`, or `s ≡ 1` without `delta`.
    IidUniform {
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    /// `ε_n = ± c · s(n)` with equal probability, `s` as for `iid_uniform`.
    IidTwoPoint {
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

fn iid_scale(n: i64, delta: Option<f64>) -> f64 {
    match delta {
        None => 1.0,
        Some(d) => (-(n.unsigned_abs() as f64).powf(0.5 - d)).exp(),
    }
}

impl DriftModel {
    pub fn stretch_exp(c: f64, alpha: f64) -> Self {
        DriftModel::StretchExp { c, alpha, sign_pattern: SignPattern::Positive }
    }

    /// Unclamped drift at level `n` given a uniform draw `u ∈ [0, 1)`.
    pub(crate) fn raw(&self, n: i64, u: f64) -> f64 {
        match *self {
            DriftModel::Zero => 0.0,
            DriftModel::Constant { value } => value,
            DriftModel::StretchExp { c, alpha, sign_pattern } => {
                c * sign_pattern.sign(n) * (-(n.unsigned_abs() as f64).powf(alpha)).exp()
            }
            DriftModel::IidUniform { c, delta } => c * iid_scale(n, delta) * (2.0 * u - 1.0),
            DriftModel::IidTwoPoint { c, delta } => {
                let s = if u < 0.5 { -1.0 } else { 1.0 };
                c * iid_scale(n, delta) * s
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        match *self {
            DriftModel::Zero => Ok(()),
            DriftModel::Constant { value } if !value.is_finite() => bad("constant drift must be finite"),
            DriftModel::StretchExp { c, alpha, .. } if !(c.is_finite() && alpha > 0.0 && alpha.is_finite()) => {
                bad("stretch_exp needs finite c and alpha > 0")
            }
            DriftModel::IidUniform { c, delta } | DriftModel::IidTwoPoint { c, delta } => {
                if !c.is_finite() {
                    return bad("iid drift scale c must be finite");
                }
                match delta {
                    Some(d) if !(d > 0.0 && d < 0.5) => bad("iid drift delta must lie in (0, 1/2)"),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpAtom {
    pub offset: Vec<i64>,
    pub weight: f64,
}

/// Family of horizontal jump laws `μ_n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Unit steps `±e_i`, tilted along `e_1` to realize the drift.
    #[default]
    UnitSteps,
    /// The same `μ` on every level; the drift is its mean.
    Fixed { atoms: Vec<JumpAtom> },
}

/// A complete environment description. Serialized as the environment JSON
/// document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentModel {
    pub dimension: usize,
    pub eta: f64,
    pub ratio_law: RatioLaw,
    pub r_law: RLaw,
    pub drift_model: DriftModel,
    #[serde(default, skip_serializing_if = "is_default_jump")]
    pub jump_law: JumpLaw,
    pub seed: u64,
}

fn is_default_jump(j: &JumpLaw) -> bool {
    *j == JumpLaw::UnitSteps
}

impl EnvironmentModel {
    /// `p = q = r = 1/3`, unit symmetric jumps, no drift.
    pub fn flat(eta: f64) -> Self {
        EnvironmentModel {
            dimension: 1,
            eta,
            ratio_law: RatioLaw::Constant { value: 1.0 },
            r_law: RLaw::Constant { value: 1.0 / 3.0 },
            drift_model: DriftModel::Zero,
            jump_law: JumpLaw::UnitSteps,
            seed: 0,
        }
    }

    /// Centered two-point ratio law `{a, 1/a}` with `r = 1/3`.
    pub fn sinai(a: f64, eta: f64, seed: u64) -> Self {
        EnvironmentModel { ratio_law: RatioLaw::two_point(a), seed, ..Self::flat(eta) }
    }

    pub fn with_drift(mut self, drift: DriftModel) -> Self {
        self.drift_model = drift;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `E log(q/p) ≠ 0` (or not structurally zero).
    pub fn is_biased(&self) -> bool {
        !self.ratio_law.is_centered()
    }

    /// Largest admissible `|ε|` for the configured jump family.
    ///
    /// In `d = 1` drifts beyond 1 are realized by jumps to the two integers
    /// bracketing `ε`; the bound is where that law's third absolute moment
    /// reaches `1/η`.
    pub fn drift_bound(&self) -> f64 {
        if self.dimension > 1 {
            return 1.0 / self.dimension as f64;
        }
        let m = 1.0 / self.eta;
        let mut k = 1.0f64;
        loop {
            let (lo, hi) = (k.powi(3), (k + 1.0).powi(3));
            if hi > m {
                return k + (m - lo) / (hi - lo);
            }
            k += 1.0;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0 / 3.0) {
            return bad(format!("eta = {} outside (0, 1/3]", self.eta));
        }
        self.ratio_law.validate()?;
        self.drift_model.validate()?;
        let (r_lo, r_hi) = self.r_law.bounds();
        if !(r_lo.is_finite() && r_hi.is_finite() && r_lo <= r_hi && r_lo > 0.0 && r_hi < 1.0) {
            return bad(format!("r_law bounds [{r_lo}, {r_hi}] invalid"));
        }
        if r_lo < self.eta {
            return bad(format!("r_law floor {r_lo} below eta {}", self.eta));
        }
        // p = (1-r)/(1+a) and q = a(1-r)/(1+a) are smallest at r = r_hi and
        // at the extreme ratios.
        let (a_lo, a_hi) = self.ratio_law.support_bounds();
        let p_min = (1.0 - r_hi) / (1.0 + a_hi);
        let q_min = a_lo * (1.0 - r_hi) / (1.0 + a_lo);
        if p_min.min(q_min) < self.eta - LAW_TOL {
            return bad(format!("infeasible: min(p, q) can reach {:.6} < eta {}", p_min.min(q_min), self.eta));
        }
        if let JumpLaw::Fixed { atoms } = &self.jump_law {
            if self.drift_model != DriftModel::Zero {
                return bad("a fixed jump law carries its own drift; drift_model must be zero".into());
            }
            if atoms.is_empty() {
                return bad("fixed jump law has no atoms".into());
            }
            let mut offsets: Vec<&Vec<i64>> = Vec::new();
            for a in atoms {
                if a.offset.len() != self.dimension {
                    return bad(format!("jump offset {:?} has wrong dimension", a.offset));
                }
                if !(a.weight > 0.0 && a.weight.is_finite()) {
                    return bad(format!("jump weight {} must be positive", a.weight));
                }
                if offsets.contains(&&a.offset) {
                    return bad(format!("duplicate jump offset {:?}", a.offset));
                }
                offsets.push(&a.offset);
            }
            let total: f64 = atoms.iter().map(|a| a.weight).sum();
            if (total - 1.0).abs() > LAW_TOL {
                return bad(format!("jump weights sum to {total}, not 1"));
            }
        }
        Ok(())
    }

    /// Smallest integer `K` with `K > 2(1 + 1/η)`.
    pub fn default_grid_base(&self) -> u64 {
        crate::analysis::default_grid_base(self.eta)
    }
}
