// SPDX-License-Identifier: Apache-2.0

//! Prefix tables over a level window `[-N⁻, N⁺]`.
//!
//! Every range that enters the dispersion functions contains the origin, so
//! all prefix sums are anchored at level 0 and grow outward. Range queries
//! then combine a right prefix and a left prefix without subtracting large
//! partial sums, which keeps the log-domain arithmetic free of catastrophic
//! cancellation even when `ρ` spans hundreds of orders of magnitude.
//!
//! Right side, `b ≥ 0` (levels `0..=b`), with `T_s = r_s ε_s / (p_s ρ_s)`
//! and `R_b = Σ_{0≤s≤b} T_s`:
//!
//! * `vr[b] = Σ ρ_k`, `wr[b] = Σ 1/ρ_k`
//! * `qr1[b] = Σ ρ_l R_l`, `qr2[b] = Σ ρ_l R_l²`
//! * `fr[b] = Σ_{0≤k≤l≤b} ρ_k ρ_l [1/ρ_k² + 1/ρ_l² + (R_l − R_{k−1})²]`
//!
//! Left side, `a ≥ 0` (levels `-a..=-1`), with `L_a = Σ_{-a≤s≤-1} T_s`,
//! mirrored. The same-side sums `fr`, `fl` are accumulated with the
//! recurrence on `A = Σ ρ_k`, `B = Σ ρ_k D_k`, `E = Σ ρ_k D_k²` where `D_k`
//! is the drift sum from `k` to the running end.

use rayon::prelude::*;

use crate::environment::EnvironmentView;
use crate::error::{Error, Result};
use crate::numerics::{LogSum, Sign, SignedLog};

/// Upper bound on tabulated levels (both sides together).
pub const MAX_WINDOW_LEVELS: usize = 50_000_000;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Level {
    /// `S_k = log ρ_k`.
    pub s: f64,
    /// `T_k = r_k ε_k / (p_k ρ_k)`.
    pub t: SignedLog,
    /// `ε_k / ρ_k`.
    pub eps_rho: SignedLog,
    pub eps: f64,
    pub log_ratio: f64,
}

/// One side of the window, anchored at the origin.
#[derive(Debug, Clone, Default)]
pub(crate) struct Side {
    pub v: Vec<SignedLog>,
    pub w: Vec<SignedLog>,
    pub drift: Vec<SignedLog>,
    pub q1: Vec<SignedLog>,
    pub q2: Vec<SignedLog>,
    pub f: Vec<SignedLog>,
    /// `Σ ε_k / ρ_k`.
    pub c: Vec<SignedLog>,
    /// `Σ |ε_k| / ρ_k`.
    pub c_abs: Vec<SignedLog>,
}

impl Side {
    /// Accumulates the side over `levels` ordered outward from the origin.
    /// With `leading_zero`, index 0 is the empty prefix.
    fn build(levels: &[Level], leading_zero: bool) -> Side {
        let cap = levels.len() + leading_zero as usize;
        let mut side = Side {
            v: Vec::with_capacity(cap),
            w: Vec::with_capacity(cap),
            drift: Vec::with_capacity(cap),
            q1: Vec::with_capacity(cap),
            q2: Vec::with_capacity(cap),
            f: Vec::with_capacity(cap),
            c: Vec::with_capacity(cap),
            c_abs: Vec::with_capacity(cap),
        };
        if leading_zero {
            for arr in side.arrays_mut() {
                arr.push(SignedLog::ZERO);
            }
        }
        let (mut v, mut w, mut drift, mut q1, mut q2, mut f, mut c, mut c_abs) = (
            LogSum::new(),
            LogSum::new(),
            LogSum::new(),
            LogSum::new(),
            LogSum::new(),
            LogSum::new(),
            LogSum::new(),
            LogSum::new(),
        );
        let mut b_acc = SignedLog::ZERO;
        let mut e_acc = SignedLog::ZERO;
        let two = SignedLog::from_real(2.0);
        for lv in levels {
            let rho = SignedLog::from_log(lv.s);
            let inv_rho = SignedLog::from_log(-lv.s);
            let t = lv.t;
            v.add(rho);
            w.add(inv_rho);
            drift.add(t);
            c.add(lv.eps_rho);
            c_abs.add(lv.eps_rho.abs());
            let a_now = v.value();
            let w_now = w.value();
            let r_now = drift.value();

            // E ← E + 2tB + t²A ; B ← B + tA (A already includes ρ_l)
            let mut e_next = LogSum::new();
            e_next.add(e_acc);
            e_next.add(two * t * b_acc);
            e_next.add(t.square() * a_now);
            e_acc = e_next.value();
            let mut b_next = LogSum::new();
            b_next.add(b_acc);
            b_next.add(t * a_now);
            b_acc = b_next.value();

            f.add(rho * w_now);
            f.add(a_now * inv_rho);
            f.add(rho * e_acc);
            q1.add(rho * r_now);
            q2.add(rho * r_now.square());

            side.v.push(a_now);
            side.w.push(w_now);
            side.drift.push(r_now);
            side.q1.push(q1.value());
            side.q2.push(q2.value());
            side.f.push(f.value());
            side.c.push(c.value());
            side.c_abs.push(c_abs.value());
        }
        side
    }

    fn arrays_mut(&mut self) -> [&mut Vec<SignedLog>; 8] {
        [
            &mut self.v,
            &mut self.w,
            &mut self.drift,
            &mut self.q1,
            &mut self.q2,
            &mut self.f,
            &mut self.c,
            &mut self.c_abs,
        ]
    }
}

/// Potential and dispersion prefix tables of one realized environment.
#[derive(Debug, Clone)]
pub struct PotentialTables {
    pub(crate) n_minus: usize,
    pub(crate) n_plus: usize,
    pub(crate) dimension: usize,
    pub(crate) eta: f64,
    pub(crate) a0: f64,
    /// Levels `-N⁻..=N⁺`; index `k + N⁻`.
    pub(crate) levels: Vec<Level>,
    /// Index `b` covers levels `0..=b`.
    pub(crate) right: Side,
    /// Index `a` covers levels `-a..=-1`; index 0 is empty.
    pub(crate) left: Side,
    /// `v_-(n) = a_0 Σ_{-n-1≤k≤-1} ρ_k` for `n = 0..N⁻-1`.
    pub(crate) v_minus: Vec<SignedLog>,
    /// `w_-(n) = (1/a_0) Σ_{-n-1≤k≤-1} 1/ρ_k` for `n = 0..N⁻-1`.
    pub(crate) w_minus: Vec<SignedLog>,
    pub(crate) pieces: super::pieces::Pieces,
}

pub fn build_tables(env: &EnvironmentView, n_minus: usize, n_plus: usize) -> Result<PotentialTables> {
    if n_minus < 1 || n_plus < 1 {
        return Err(Error::InvalidArgument("window sides must be at least 1".into()));
    }
    let total = n_minus + n_plus + 1;
    if total > MAX_WINDOW_LEVELS {
        return Err(Error::WindowTooLarge { levels: total, budget: MAX_WINDOW_LEVELS });
    }
    let lo = -(n_minus as i64);
    let hi = n_plus as i64;
    let raw: Vec<(f64, f64, f64, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|n| {
            let s = env.stratum(n);
            (s.ratio().ln(), s.p, s.r, s.drift())
        })
        .collect();
    let idx = |k: i64| (k - lo) as usize;
    let a0 = raw[idx(0)].0.exp();

    // S_0 = 0, S_k = S_{k-1} + log a_k (k ≥ 1), S_{-i} = S_{-i+1} + log a_{-i+1}.
    let mut s = vec![0.0; total];
    for k in 1..=hi {
        s[idx(k)] = s[idx(k - 1)] + raw[idx(k)].0;
    }
    for k in (lo..0).rev() {
        s[idx(k)] = s[idx(k + 1)] + raw[idx(k + 1)].0;
    }

    let levels: Vec<Level> = raw
        .iter()
        .zip(&s)
        .map(|(&(log_ratio, p, r, eps), &sk)| {
            let eps_sl = SignedLog::from_real(eps);
            let t = if eps_sl.is_zero() {
                SignedLog::ZERO
            } else {
                SignedLog::new(eps_sl.sign(), (r / p).ln() + eps_sl.lmag() - sk)
            };
            let eps_rho = SignedLog::new(eps_sl.sign(), eps_sl.lmag() - sk);
            Level { s: sk, t, eps_rho, eps, log_ratio }
        })
        .collect();

    Ok(assemble(n_minus, n_plus, env.dimension(), env.eta(), a0, levels))
}

fn assemble(n_minus: usize, n_plus: usize, dimension: usize, eta: f64, a0: f64, levels: Vec<Level>) -> PotentialTables {
    let origin = n_minus;
    let right_levels: Vec<Level> = levels[origin..].to_vec();
    let left_levels: Vec<Level> = levels[..origin].iter().rev().cloned().collect();
    let (right, left) = rayon::join(|| Side::build(&right_levels, false), || Side::build(&left_levels, true));

    let a0_sl = SignedLog::from_real(a0);
    let v_minus: Vec<SignedLog> = left.v[1..].iter().map(|&v| a0_sl * v).collect();
    let w_minus: Vec<SignedLog> = left.w[1..].iter().map(|&w| w.div(a0_sl)).collect();

    let mut t = PotentialTables {
        n_minus,
        n_plus,
        dimension,
        eta,
        a0,
        levels,
        right,
        left,
        v_minus,
        w_minus,
        pieces: Default::default(),
    };
    t.pieces = super::pieces::Pieces::build(&t);
    t
}

impl PotentialTables {
    pub fn window(&self) -> (i64, i64) {
        (-(self.n_minus as i64), self.n_plus as i64)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub(crate) fn level(&self, k: i64) -> &Level {
        &self.levels[(k + self.n_minus as i64) as usize]
    }

    /// `log ρ_k` for `k` in the window.
    pub fn log_rho(&self, k: i64) -> f64 {
        self.level(k).s
    }

    /// `v_+(n)` for `n = 0..=N⁺`.
    pub fn v_plus(&self) -> &[SignedLog] {
        &self.right.v
    }

    /// `v_-(n)` for `n = 0..N⁻`.
    pub fn v_minus(&self) -> &[SignedLog] {
        &self.v_minus
    }

    /// `w_+(n)` for `n = 0..=N⁺`.
    pub fn w_plus(&self) -> &[SignedLog] {
        &self.right.w
    }

    /// `w_-(n)` for `n = 0..N⁻`.
    pub fn w_minus(&self) -> &[SignedLog] {
        &self.w_minus
    }

    /// Signed drift prefix `Σ_{0≤s≤b} T_s`.
    pub fn drift_prefix_right(&self) -> &[SignedLog] {
        &self.right.drift
    }

    /// Signed drift prefix `Σ_{-a≤s≤-1} T_s`, index 0 empty.
    pub fn drift_prefix_left(&self) -> &[SignedLog] {
        &self.left.drift
    }

    /// `Σ_{-a≤k≤b} 1/ρ_k`.
    pub fn inv_rho_sum(&self, a: usize, b: usize) -> SignedLog {
        self.right.w[b] + self.left.w[a]
    }

    /// `Σ_{-a≤k≤b} ε_k/ρ_k`.
    pub fn drift_mass(&self, a: usize, b: usize) -> SignedLog {
        self.right.c[b] + self.left.c[a]
    }

    /// `Φ²(-a, b)` indexed directly by level counts: the sum over
    /// `-a ≤ k ≤ l ≤ b`.
    pub fn phi2_levels(&self, a: usize, b: usize) -> SignedLog {
        let (r, l) = (&self.right, &self.left);
        let mut s = LogSum::new();
        s.add(r.f[b]);
        s.add(l.f[a]);
        if a > 0 {
            s.add(r.v[b] * l.w[a]);
            s.add(l.v[a] * r.w[b]);
            s.add(l.q2[a] * r.v[b]);
            s.add(SignedLog::from_real(2.0) * l.q1[a] * r.q1[b]);
            s.add(l.v[a] * r.q2[b]);
        }
        let v = s.value();
        // a sum of nonnegative terms; residual negatives are cancellation noise
        if v.sign() == Sign::Neg {
            SignedLog::ZERO
        } else {
            v
        }
    }

    /// `Φ²(-a, 0) + Φ²(0, b)`.
    pub fn phi_plus2_levels(&self, a: usize, b: usize) -> SignedLog {
        self.phi2_levels(a, 0) + self.phi2_levels(0, b)
    }

    /// The same landscape with every drift set to zero.
    pub fn without_drift(&self) -> PotentialTables {
        let levels = self
            .levels
            .iter()
            .map(|lv| Level { t: SignedLog::ZERO, eps_rho: SignedLog::ZERO, eps: 0.0, ..*lv })
            .collect();
        assemble(self.n_minus, self.n_plus, self.dimension, self.eta, self.a0, levels)
    }

    /// True when some level of the window carries a nonzero drift.
    pub fn has_drift(&self) -> bool {
        self.levels.iter().any(|lv| lv.eps != 0.0)
    }

    /// Number of levels on each side.
    pub fn sides(&self) -> (usize, usize) {
        (self.n_minus, self.n_plus)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// Splits a budget of `levels` tabulated levels into `(N⁻, N⁺)` so that the
/// largest scale resolvable on both sides, `min(v_+(N⁺), v_-(N⁻-1))`, is
/// as large as possible.
pub fn balanced_window(env: &EnvironmentView, levels: usize) -> Result<(usize, usize)> {
    if levels < 3 {
        return Err(Error::InvalidArgument("window budget must be at least 3 levels".into()));
    }
    if levels > MAX_WINDOW_LEVELS {
        return Err(Error::WindowTooLarge { levels, budget: MAX_WINDOW_LEVELS });
    }
    let reach = levels as i64 - 2;
    let log_a: Vec<f64> = (-reach..=reach).into_par_iter().map(|n| env.stratum(n).ratio().ln()).collect();
    let la = |k: i64| log_a[(k + reach) as usize];
    // log v_+(b) for b = 0..=reach
    let mut right = Vec::with_capacity(reach as usize + 1);
    let (mut s, mut acc) = (0.0, LogSum::new());
    for b in 0..=reach {
        if b > 0 {
            s += la(b);
        }
        acc.add(SignedLog::from_log(s));
        right.push(acc.value().lmag());
    }
    // log v_-(n) for n = 0..reach, v_-(n) = a_0 Σ_{-n-1≤k≤-1} ρ_k
    let mut left = Vec::with_capacity(reach as usize);
    let (mut s, mut acc) = (0.0, LogSum::new());
    for i in 1..=reach {
        s += la(-i + 1);
        acc.add(SignedLog::from_log(s));
        left.push(acc.value().lmag() + la(0));
    }
    // N⁺ + N⁻ + 1 = levels, N⁻ ≥ 1, N⁺ ≥ 1
    let total = levels - 1;
    let best = (1..total)
        .map(|n_plus| {
            let n_minus = total - n_plus;
            (right[n_plus].min(left[n_minus - 1]), n_plus)
        })
        .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)))
        .expect("nonempty split range");
    Ok((total - best.1, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, DriftModel, EnvironmentModel, RatioLaw};

    fn real(x: SignedLog) -> f64 {
        x.to_real().unwrap()
    }

    fn constant_ratio(a: f64, eta: f64) -> EnvironmentView {
        let m = EnvironmentModel { ratio_law: RatioLaw::Constant { value: a }, ..EnvironmentModel::flat(eta) };
        build_environment(m).unwrap()
    }

    #[test]
    fn flat_scale_functions_count_levels() {
        let env = build_environment(EnvironmentModel::flat(0.2)).unwrap();
        let t = build_tables(&env, 300, 400).unwrap();
        for k in -300..=400 {
            assert_eq!(t.log_rho(k), 0.0);
        }
        for (n, (v, w)) in t.v_plus().iter().zip(t.w_plus()).enumerate() {
            assert!((real(*v) - (n + 1) as f64).abs() < 1e-12 * (n + 1) as f64);
            assert!((real(*w) - (n + 1) as f64).abs() < 1e-12 * (n + 1) as f64);
        }
        assert_eq!(t.v_plus().len(), 401);
        assert_eq!(t.v_minus().len(), 300);
        for (n, v) in t.v_minus().iter().enumerate() {
            assert!((real(*v) - (n + 1) as f64).abs() < 1e-12 * (n + 1) as f64);
        }
    }

    #[test]
    fn potential_matches_direct_products() {
        // ρ_n = a_1⋯a_n above the origin and a_{n+1}⋯a_0 below it
        let env = build_environment(EnvironmentModel::sinai(2.0, 0.2, 11)).unwrap();
        let t = build_tables(&env, 60, 60).unwrap();
        let a = |n: i64| env.stratum(n).q / env.stratum(n).p;
        let mut rho = 1.0;
        for n in 1..=60 {
            rho *= a(n);
            assert!((t.log_rho(n) - rho.ln()).abs() < 1e-12, "level {n}");
        }
        for n in 1..=60i64 {
            let direct: f64 = (-n + 1..=0).map(a).product();
            assert!((t.log_rho(-n) - direct.ln()).abs() < 1e-12, "level -{n}");
        }
        // v_-(n) = a_0 Σ_{-n-1≤k≤-1} ρ_k
        for n in 0..59usize {
            let direct: f64 = a(0) * (1..=n as i64 + 1).map(|i| t.log_rho(-i).exp()).sum::<f64>();
            assert!((real(t.v_minus()[n]) / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_two_gives_geometric_v_plus() {
        let env = constant_ratio(2.0, 0.2);
        let t = build_tables(&env, 5, 60).unwrap();
        for n in 0..=60 {
            let want = 2f64.powi(n + 1) - 1.0;
            assert!((real(t.v_plus()[n as usize]) / want - 1.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn single_index_phi_squared() {
        let m = EnvironmentModel::sinai(2.0, 0.2, 3).with_drift(DriftModel::stretch_exp(0.7, 0.5));
        let env = build_environment(m).unwrap();
        let t = build_tables(&env, 10, 10).unwrap();
        let s = env.stratum(0);
        let want = 2.0 + (s.r * s.drift() / s.p).powi(2);
        assert!((real(t.phi2_levels(0, 0)) - want).abs() < 1e-13);
    }

    #[test]
    fn drift_free_copy_keeps_landscape() {
        let m = EnvironmentModel::sinai(2.0, 0.2, 5).with_drift(DriftModel::stretch_exp(1.0, 0.25));
        let env = build_environment(m).unwrap();
        let t = build_tables(&env, 200, 200).unwrap();
        let t0 = t.without_drift();
        assert!(t.has_drift() && !t0.has_drift());
        assert_eq!(t.v_plus(), t0.v_plus());
        assert_eq!(t.w_minus(), t0.w_minus());
        assert!(t0.phi2_levels(100, 100) < t.phi2_levels(100, 100));
    }

    #[test]
    fn window_limits() {
        let env = build_environment(EnvironmentModel::flat(0.2)).unwrap();
        assert!(build_tables(&env, 0, 5).is_err());
        assert!(matches!(build_tables(&env, MAX_WINDOW_LEVELS, 1), Err(Error::WindowTooLarge { .. })));
        // flat: v_+(N⁺) = N⁺ + 1 and v_-(N⁻ - 1) = N⁻; ties go to the smaller N⁺
        assert_eq!(balanced_window(&env, 102).unwrap(), (51, 50));
        assert_eq!(balanced_window(&env, 101).unwrap(), (51, 49));
    }
}
