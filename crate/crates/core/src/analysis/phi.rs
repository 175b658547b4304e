// SPDX-License-Identifier: Apache-2.0

//! Forward evaluation of the structure and dispersion functions at a scale.

use super::tables::PotentialTables;
use crate::error::{out_of_window, Error, Result};
use crate::numerics::{LogSum, SignedLog};

/// Default index cap for [`phi_brute`].
pub const BRUTE_FORCE_CAP: usize = 4000;

impl PotentialTables {
    /// `v_+⁻¹(x)` clamped to 0 below `v_+(0)`.
    pub fn right_levels(&self, x: SignedLog) -> Result<usize> {
        let v = &self.right.v;
        if x.sign() == crate::numerics::Sign::Neg {
            return Err(Error::InvalidArgument("negative scale".into()));
        }
        if x >= v[v.len() - 1] {
            return Err(out_of_window("v_+ inverse", x.lmag()));
        }
        Ok(v.partition_point(|y| *y <= x).saturating_sub(1))
    }

    /// `v_-⁻¹(x)` clamped to 0 below `v_-(0)`.
    pub fn left_levels(&self, x: SignedLog) -> Result<usize> {
        let v = &self.v_minus;
        if x.sign() == crate::numerics::Sign::Neg {
            return Err(Error::InvalidArgument("negative scale".into()));
        }
        if v.is_empty() || x >= v[v.len() - 1] {
            return Err(out_of_window("v_- inverse", x.lmag()));
        }
        Ok(v.partition_point(|y| *y <= x).saturating_sub(1))
    }

    /// `(v_-⁻¹(x), v_+⁻¹(x))`.
    pub fn levels_at(&self, x: SignedLog) -> Result<(usize, usize)> {
        Ok((self.left_levels(x)?, self.right_levels(x)?))
    }

    /// Largest scale that can be resolved inside the window (exclusive).
    pub fn scale_cap(&self) -> SignedLog {
        self.pieces.cap
    }

    /// Number of monotonicity violations of `Φ` and `Φ_+` across pieces.
    /// Both are sums of nonnegative terms over growing index sets, so any
    /// nonzero count signals loss of precision.
    pub fn monotonicity_violations(&self) -> (usize, usize) {
        (self.pieces.phi_decreases, self.pieces.phi_plus_decreases)
    }
}

/// `Φ_str(n) = (n Σ_{-v_-⁻¹(n)≤k≤v_+⁻¹(n)} 1/ρ_k)^{1/2}`.
pub fn phi_str(t: &PotentialTables, n: SignedLog) -> Result<SignedLog> {
    let (a, b) = t.levels_at(n)?;
    Ok((n * t.inv_rho_sum(a, b)).sqrt())
}

/// `Ψ(n) = Φ_str(n)²`.
pub fn psi(t: &PotentialTables, n: SignedLog) -> Result<SignedLog> {
    let (a, b) = t.levels_at(n)?;
    Ok(n * t.inv_rho_sum(a, b))
}

/// `Φ(-m, n)`.
pub fn phi_range(t: &PotentialTables, m: SignedLog, n: SignedLog) -> Result<SignedLog> {
    t.dimension_check()?;
    let a = t.left_levels(m)?;
    let b = t.right_levels(n)?;
    Ok(t.phi2_levels(a, b).sqrt())
}

/// `Φ(n) = Φ(-n, n)`.
pub fn phi_sym(t: &PotentialTables, n: SignedLog) -> Result<SignedLog> {
    phi_range(t, n, n)
}

/// `Φ_+(n) = (Φ²(-n, 0) + Φ²(0, n))^{1/2}`.
pub fn phi_plus(t: &PotentialTables, n: SignedLog) -> Result<SignedLog> {
    let left = phi_range(t, n, SignedLog::ZERO)?;
    let right = phi_range(t, SignedLog::ZERO, n)?;
    Ok((left.square() + right.square()).sqrt())
}

/// Drift mass `C(n) = Σ_{-v_-⁻¹(n)≤k≤v_+⁻¹(n)} ε_k/ρ_k`.
pub fn drift_mass(t: &PotentialTables, n: SignedLog) -> Result<SignedLog> {
    t.dimension_check()?;
    let (a, b) = t.levels_at(n)?;
    Ok(t.drift_mass(a, b))
}

/// Literal double sum for `Φ(-m, n)`, quadratic in the number of levels.
pub fn phi_brute(t: &PotentialTables, m: SignedLog, n: SignedLog) -> Result<SignedLog> {
    phi_brute_capped(t, m, n, BRUTE_FORCE_CAP)
}

pub fn phi_brute_capped(t: &PotentialTables, m: SignedLog, n: SignedLog, cap: usize) -> Result<SignedLog> {
    t.dimension_check()?;
    let a = t.left_levels(m)?;
    let b = t.right_levels(n)?;
    phi_brute_levels(t, a, b, cap)
}

/// Literal `Φ²(-a, b)` over `-a ≤ k ≤ l ≤ b`, returned as `Φ`.
pub fn phi_brute_levels(t: &PotentialTables, a: usize, b: usize, cap: usize) -> Result<SignedLog> {
    let lo = -(a as i64);
    let hi = b as i64;
    let count = a + b + 1;
    if count > cap {
        return Err(Error::BruteForceCap { indices: count, cap });
    }
    let mut total = LogSum::new();
    for k in lo..=hi {
        let sk = t.log_rho(k);
        let mut d = SignedLog::ZERO;
        for l in k..=hi {
            let lv = t.level(l);
            d = d + lv.t;
            let sl = lv.s;
            // ρ_k ρ_l (1/ρ_k² + 1/ρ_l² + D²)
            total.add(SignedLog::from_log(sl - sk));
            total.add(SignedLog::from_log(sk - sl));
            total.add(SignedLog::from_log(sk + sl) * d.square());
        }
    }
    Ok(total.value().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{balanced_window, build_tables};
    use crate::environment::{build_environment, DriftModel, EnvironmentModel, EnvironmentView};
    use crate::numerics::log_distance;

    fn n(x: u64) -> SignedLog {
        SignedLog::from_u64(x)
    }

    fn flat() -> PotentialTables {
        let env = build_environment(EnvironmentModel::flat(0.2)).unwrap();
        build_tables(&env, 2000, 2000).unwrap()
    }

    fn balanced(env: &EnvironmentView, levels: usize) -> PotentialTables {
        let (a, b) = balanced_window(env, levels).unwrap();
        build_tables(env, a, b).unwrap()
    }

    fn drifted(seed: u64, alpha: f64) -> EnvironmentView {
        let m = EnvironmentModel::sinai(2.0, 0.2, seed).with_drift(DriftModel::stretch_exp(1.0, alpha));
        build_environment(m).unwrap()
    }

    /// `Φ²(-a, b)` in plain `f64`, from the strata themselves.
    fn phi2_direct(env: &EnvironmentView, a: i64, b: i64) -> f64 {
        let st: Vec<_> = (-a..=b).map(|k| env.stratum(k)).collect();
        let at = |k: i64| &st[(k + a) as usize];
        let ratio = |k: i64| at(k).q / at(k).p;
        let rho = |k: i64| -> f64 {
            if k >= 0 {
                (1..=k).map(ratio).product()
            } else {
                (k + 1..=0).map(ratio).product()
            }
        };
        let rhos: Vec<f64> = (-a..=b).map(rho).collect();
        let tt: Vec<f64> = (-a..=b).map(|k| at(k).r * at(k).drift() / (at(k).p * rhos[(k + a) as usize])).collect();
        let mut total = 0.0;
        for i in 0..rhos.len() {
            let mut d = 0.0;
            for j in i..rhos.len() {
                d += tt[j];
                let (rk, rl) = (rhos[i], rhos[j]);
                total += rk * rl * (1.0 / (rk * rk) + 1.0 / (rl * rl) + d * d);
            }
        }
        total
    }

    #[test]
    fn flat_closed_forms() {
        let t = flat();
        assert!((phi_str(&t, n(1)).unwrap().to_real().unwrap() - 1.0).abs() < 1e-15);
        assert!((phi_str(&t, n(5)).unwrap().to_real().unwrap() - 45f64.sqrt()).abs() < 1e-13);
        assert!((phi_sym(&t, n(5)).unwrap().to_real().unwrap() - 90f64.sqrt()).abs() < 1e-13);
        assert!((phi_plus(&t, n(5)).unwrap().to_real().unwrap() - 60f64.sqrt()).abs() < 1e-13);
        for k in 1..=1000u64 {
            let kf = k as f64;
            let s = phi_str(&t, n(k)).unwrap().to_real().unwrap();
            assert!((s / (kf * (2.0 * kf - 1.0)).sqrt() - 1.0).abs() < 1e-12);
            let p = phi_sym(&t, n(k)).unwrap().to_real().unwrap();
            assert!((p / ((2.0 * kf - 1.0) * 2.0 * kf).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn range_matches_direct_double_sum() {
        for (seed, alpha) in [(0, 0.25), (4, 0.75), (9, 0.5)] {
            let env = drifted(seed, alpha);
            let t = build_tables(&env, 100, 100).unwrap();
            for (a, b) in [(0, 0), (0, 17), (23, 0), (12, 40), (40, 40)] {
                let want = phi2_direct(&env, a as i64, b as i64);
                let got = t.phi2_levels(a, b).to_real().unwrap();
                assert!((got / want - 1.0).abs() < 1e-11, "seed {seed} ({a}, {b}): {got} vs {want}");
                let brute = phi_brute_levels(&t, a, b, BRUTE_FORCE_CAP).unwrap().square().to_real().unwrap();
                assert!((brute / want - 1.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn range_matches_brute_on_drifted_sinai() {
        // seed 0 needs ~6.7e4 levels for scale 500, past the brute-force cap
        let env = drifted(1, 0.25);
        let t = balanced(&env, 100_000);
        let fast = phi_range(&t, n(500), n(500)).unwrap();
        let slow = phi_brute(&t, n(500), n(500)).unwrap();
        assert!(log_distance(fast, slow) <= 1e-9);
        assert!(matches!(
            phi_brute(&balanced(&drifted(0, 0.25), 100_000), n(500), n(500)),
            Err(Error::BruteForceCap { .. })
        ));
    }

    #[test]
    fn structure_function_matches_direct_sum() {
        let env = build_environment(EnvironmentModel::sinai(2.0, 0.2, 0)).unwrap();
        let t = balanced(&env, 100_000);
        let x = n(1000);
        let (a, b) = t.levels_at(x).unwrap();
        let mut sum = LogSum::new();
        for k in -(a as i64)..=b as i64 {
            sum.add(SignedLog::from_log(-t.log_rho(k)));
        }
        let want = (x * sum.value()).sqrt();
        assert!(log_distance(phi_str(&t, x).unwrap(), want) <= 1e-10);
        assert_eq!(psi(&t, x).unwrap(), phi_str(&t, x).unwrap().square());
    }

    #[test]
    fn origin_pair_is_counted_twice_in_phi_plus() {
        for seed in 0..20 {
            let env = drifted(seed, 0.5);
            let t = balanced(&env, 100_000);
            let s = env.stratum(0);
            let origin = 2.0 + (s.r * s.drift() / s.p).powi(2);
            for x in [1, 3, 10, 40, 200] {
                let x = n(x);
                if t.levels_at(x).is_err() {
                    continue;
                }
                let full = phi_sym(&t, x).unwrap().square().to_real().unwrap();
                let plus = phi_plus(&t, x).unwrap().square().to_real().unwrap();
                let left = phi_range(&t, x, SignedLog::ZERO).unwrap();
                let right = phi_range(&t, SignedLog::ZERO, x).unwrap();
                assert!(full >= plus - origin - 1e-9 * full);
                assert!(phi_sym(&t, x).unwrap() >= left.max(right));
                assert_eq!(phi_plus(&t, x).unwrap(), (left.square() + right.square()).sqrt());
            }
        }
    }

    #[test]
    fn brute_force_cap_and_window() {
        let t = flat();
        assert!(matches!(phi_brute_capped(&t, n(100), n(100), 50), Err(Error::BruteForceCap { .. })));
        assert!(matches!(phi_str(&t, n(1_000_000)), Err(Error::OutOfWindow { .. })));
        assert!(phi_range(&t, SignedLog::from_real(-1.0), n(1)).is_err());
    }

    #[test]
    fn drift_mass_counts_levels_for_unit_drift() {
        let m = EnvironmentModel::flat(0.2).with_drift(DriftModel::Constant { value: 1.0 });
        let t = build_tables(&build_environment(m).unwrap(), 500, 500).unwrap();
        for k in [1u64, 2, 7, 100] {
            let c = drift_mass(&t, n(k)).unwrap().to_real().unwrap();
            assert!((c - (2 * k - 1) as f64).abs() < 1e-10);
        }
    }
}
