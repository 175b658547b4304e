// SPDX-License-Identifier: Apache-2.0

//! Auxiliary diagnostics: dominated variation, the structure condition,
//! half-pipe sums, the `Φ∘Ψ⁻¹` normalization and table invariants.

use serde::{Deserialize, Serialize};

use super::inverse::{phi_inverse, PhiKind};
use super::phi::{phi_str, phi_sym};
use super::series::GridSpec;
use super::tables::{balanced_window, build_tables, PotentialTables};
use crate::environment::EnvironmentView;
use crate::error::{Error, Result};
use crate::numerics::{LogSum, SignedLog};

/// One probe of `f⁻¹(2x) / f⁻¹(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvPoint {
    pub x: SignedLog,
    pub inv_x: SignedLog,
    pub inv_2x: SignedLog,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvEstimate {
    pub which: PhiKind,
    pub c_hat: f64,
    pub points: Vec<DvPoint>,
    /// Probes skipped because `f⁻¹(x) = 0` or `2x` left the window.
    pub skipped: usize,
}

/// Largest argument (exclusive) at which `f⁻¹` is resolved in the window.
pub fn inverse_domain(t: &PotentialTables, which: PhiKind) -> SignedLog {
    let p = &t.pieces;
    let last = p.len() - 1;
    match which {
        PhiKind::Phi => p.phi2[last].sqrt(),
        PhiKind::PhiPlus => p.phi_plus2[last].sqrt(),
        PhiKind::PhiStr => (p.start[last] * p.w[last]).sqrt(),
    }
}

/// Probes `x = 2^{i/2}`, `i ≥ 2`, while `2x` stays inside the domain of
/// `f⁻¹`.
pub fn dv_probe_grid(t: &PotentialTables, which: PhiKind) -> Vec<SignedLog> {
    let top = inverse_domain(t, which).lmag() - std::f64::consts::LN_2;
    let half = 0.5 * std::f64::consts::LN_2;
    (2..).map(|i| SignedLog::from_log(i as f64 * half)).take_while(|x| x.lmag() < top).collect()
}

/// `Ĉ = max f⁻¹(2x)/f⁻¹(x)` over the criterion grid `x = K^j`.
pub fn dominated_variation_estimate(t: &PotentialTables, which: PhiKind, grid: GridSpec) -> Result<DvEstimate> {
    let xs: Vec<SignedLog> = grid.points().map(|j| grid.scale(j)).collect();
    dominated_variation_at(t, which, &xs)
}

/// `Ĉ` over arbitrary probes. Probes where `f⁻¹(x) = 0` carry no
/// information and are skipped, as are probes past the window.
pub fn dominated_variation_at(t: &PotentialTables, which: PhiKind, xs: &[SignedLog]) -> Result<DvEstimate> {
    let two = SignedLog::from_real(2.0);
    let mut points = Vec::with_capacity(xs.len());
    let mut skipped = 0;
    for &x in xs {
        let pair = phi_inverse(t, x, which).and_then(|a| Ok((a, phi_inverse(t, two * x, which)?)));
        match pair {
            Ok((a, b)) if a.is_positive() => {
                let ratio = b.div(a).to_real()?;
                points.push(DvPoint { x, inv_x: a, inv_2x: b, ratio });
            }
            Ok(_) | Err(Error::OutOfWindow { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::Insufficient(format!("no resolvable probe for {}", which.name())));
    }
    let c_hat = points.iter().map(|p| p.ratio).fold(f64::NAN, f64::max);
    Ok(DvEstimate { which, c_hat, points, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvStability {
    pub which: PhiKind,
    pub levels: usize,
    pub c_hat: f64,
    pub c_hat_doubled: f64,
    /// `|Ĉ(2W) − Ĉ(W)| / Ĉ(W)`.
    pub relative_change: f64,
}

/// `Ĉ` on a balanced window of `levels` levels and on one of twice the
/// size, each over the dense probe grid its window supports.
pub fn dominated_variation_stability(
    env: &EnvironmentView,
    levels: usize,
    kinds: &[PhiKind],
) -> Result<Vec<DvStability>> {
    let tables = |lv: usize| -> Result<PotentialTables> {
        let (nm, np) = balanced_window(env, lv)?;
        build_tables(env, nm, np)
    };
    let (small, large) = (tables(levels)?, tables(2 * levels)?);
    kinds
        .iter()
        .map(|&which| {
            let c_hat = dominated_variation_at(&small, which, &dv_probe_grid(&small, which))?.c_hat;
            let c_hat_doubled = dominated_variation_at(&large, which, &dv_probe_grid(&large, which))?.c_hat;
            Ok(DvStability {
                which,
                levels,
                c_hat,
                c_hat_doubled,
                relative_change: (c_hat_doubled - c_hat).abs() / c_hat,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub j: u32,
    pub n: SignedLog,
    /// `Φ_str(n) / (√n (log n)^{1/2+ε})`.
    pub ratio: Option<SignedLog>,
    /// `Φ_str(n) / (√n exp((log n)^{1−ε}))`.
    pub strong_ratio: Option<SignedLog>,
}

/// Profile of `Φ_str` against `√n (log n)^{1/2+ε}` and the stronger
/// `√n exp((log n)^{1−ε})` on the grid.
pub fn structure_condition(t: &PotentialTables, epsilon: f64, grid: GridSpec) -> Result<Vec<StructureRow>> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} must be positive")));
    }
    Ok(grid
        .points()
        .map(|j| {
            let n = grid.scale(j);
            let ln_n = n.lmag();
            let s = phi_str(t, n).ok();
            let base = 0.5 * ln_n;
            StructureRow {
                j,
                n,
                ratio: s.map(|s| SignedLog::from_log(s.lmag() - base - (0.5 + epsilon) * ln_n.ln())),
                strong_ratio: s.map(|s| SignedLog::from_log(s.lmag() - base - ln_n.powf(1.0 - epsilon))),
            }
        })
        .collect())
}

/// The last grid row where the structure ratio could be evaluated.
pub fn structure_at_largest(rows: &[StructureRow]) -> Option<&StructureRow> {
    rows.iter().rev().find(|r| r.ratio.is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPipeReport {
    /// `Σ 1/ρ_k` over the window.
    pub tail_sum_inv_rho: SignedLog,
    /// Share of that sum carried by the outer quarter of each side.
    pub outer_share: f64,
    pub converges: bool,
    /// `Σ r_s ε_s / (p_s ρ_s)` over the window.
    pub drift_sum: SignedLog,
    /// `Σ |ε_k| / ρ_k` over the window.
    pub abs_drift_mass: SignedLog,
}

/// Share of `Σ 1/ρ` below which the windowed sum is read as convergent.
pub const HALF_PIPE_TAIL_SHARE: f64 = 1e-6;

pub fn half_pipe_diagnostic(t: &PotentialTables) -> HalfPipeReport {
    let (nm, np) = t.sides();
    let total = t.inv_rho_sum(nm, np);
    let inner = t.inv_rho_sum(nm - nm / 4, np - np / 4);
    let outer = total - inner;
    let outer_share = if outer.is_positive() { outer.div(total).to_real().unwrap_or(1.0) } else { 0.0 };
    let mut drift = LogSum::new();
    drift.add(t.right.drift[np]);
    drift.add(t.left.drift[nm]);
    HalfPipeReport {
        tail_sum_inv_rho: total,
        outer_share,
        converges: outer_share < HALF_PIPE_TAIL_SHARE,
        drift_sum: drift.value(),
        abs_drift_mass: t.right.c_abs[np] + t.left.c_abs[nm],
    }
}

/// `Ψ⁻¹(y) = Φ_str⁻¹(√y)`.
pub fn psi_inverse(t: &PotentialTables, y: SignedLog) -> Result<SignedLog> {
    phi_inverse(t, y.sqrt(), PhiKind::PhiStr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRow {
    pub j: u32,
    pub n: SignedLog,
    pub psi_inv: Option<SignedLog>,
    /// `Φ(Ψ⁻¹(K^j))`.
    pub value: Option<SignedLog>,
}

pub fn normalization_profile(t: &PotentialTables, grid: GridSpec) -> Result<Vec<NormalizationRow>> {
    t.dimension_check()?;
    Ok(grid
        .points()
        .map(|j| {
            let n = grid.scale(j);
            let psi_inv = psi_inverse(t, n).ok();
            let value = psi_inv.and_then(|m| phi_sym(t, m).ok());
            NormalizationRow { j, n, psi_inv, value }
        })
        .collect())
}

/// Least-squares slope of `log y` against `log x` over `(x, y)` pairs.
pub fn log_log_slope(pairs: &[(SignedLog, SignedLog)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0.lmag()).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1.lmag()).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0.lmag() - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0.lmag() - mx) * (p.1.lmag() - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Running maximum of `w_+(n)/v_+(n)` for `n = 0..=N⁺`.
pub fn running_max_w_over_v(t: &PotentialTables) -> Vec<SignedLog> {
    let mut best = SignedLog::ZERO;
    t.w_plus()
        .iter()
        .zip(t.v_plus())
        .map(|(&w, &v)| {
            best = best.max(w.div(v));
            best
        })
        .collect()
}

/// Counts of violated table invariants; all zero on a healthy build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `S_{n+1} − S_n` outside `[log η, −log η]` or inconsistent with `log a`.
    pub increments: usize,
    /// `v_±`, `w_±` decreasing. Flat steps are allowed: a term far below the
    /// running sum is absorbed in floating point.
    pub scale_functions: usize,
    /// `Φ`, `Φ_+` decreasing across pieces.
    pub phi: usize,
    /// `Φ_str` decreasing at piece starts.
    pub phi_str: usize,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        *self == InvariantReport::default()
    }
}

impl PotentialTables {
    pub fn check_invariants(&self) -> InvariantReport {
        let mut r = InvariantReport::default();
        let bound = -self.eta.ln() + 1e-12;
        let (lo, hi) = self.window();
        for k in lo..hi {
            let d = self.log_rho(k + 1) - self.log_rho(k);
            // for k ≥ 0 the step is log a_{k+1}; below the origin it is -log a_{k+1}
            let expect = if k >= 0 { self.level(k + 1).log_ratio } else { -self.level(k + 1).log_ratio };
            if d.abs() > bound || (d - expect).abs() > 1e-9 {
                r.increments += 1;
            }
        }
        for arr in [self.v_plus(), self.v_minus(), self.w_plus(), self.w_minus()] {
            r.scale_functions += arr.windows(2).filter(|w| w[1] < w[0]).count();
        }
        let (a, b) = self.monotonicity_violations();
        r.phi = a + b;
        let p = &self.pieces;
        r.phi_str = (1..p.len()).filter(|&i| p.start[i] * p.w[i] < p.start[i - 1] * p.w[i - 1]).count();
        r
    }
}
