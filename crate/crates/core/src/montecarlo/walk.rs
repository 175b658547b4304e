// SPDX-License-Identifier: Apache-2.0

//! Single quenched walks on `ℤ^d × ℤ` and the vertical chain.

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentView, Stratum};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WalkState {
    pub h: Vec<i64>,
    pub v: i64,
    pub t: u64,
}

impl WalkState {
    pub fn origin(d: usize) -> Self {
        WalkState { h: vec![0; d], v: 0, t: 0 }
    }

    pub fn at_origin(&self) -> bool {
        self.v == 0 && self.h.iter().all(|&x| x == 0)
    }
}

/// Return and exit times of the axis `ℤ^d × {0}`, with the horizontal
/// increments between consecutive returns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExcursionStats {
    /// `σ_0 = 0` and the later return times.
    pub sigma: Vec<u64>,
    /// `τ_k`: first time off the axis after `σ_k`.
    pub tau: Vec<u64>,
    /// `D_k = h(σ_k) − h(σ_{k−1})`, `k ≥ 1`.
    pub d: Vec<Vec<i64>>,
}

impl ExcursionStats {
    /// `σ_0 < τ_0 < σ_1 < τ_1 < ⋯` and one increment per return.
    pub fn is_interleaved(&self) -> bool {
        if self.sigma.first() != Some(&0) || self.d.len() + 1 != self.sigma.len() {
            return false;
        }
        if self.tau.len() != self.sigma.len() && self.tau.len() + 1 != self.sigma.len() {
            return false;
        }
        let mut merged = Vec::with_capacity(self.sigma.len() + self.tau.len());
        for (i, &s) in self.sigma.iter().enumerate() {
            merged.push(s);
            if let Some(&t) = self.tau.get(i) {
                merged.push(t);
            }
        }
        merged.windows(2).all(|w| w[0] < w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub steps: u64,
    /// Times `t ≥ 1` with `S_t = 0`.
    pub returns_origin: u64,
    /// Times `t ≥ 1` with vertical coordinate 0.
    pub returns_vertical: u64,
    /// Last `t` with `S_t = 0` (0 when none).
    pub last_return_t: u64,
    /// Last `t ≥ 1` with vertical coordinate 0 (0 when none).
    pub last_vertical_return_t: u64,
    pub max_abs_v: u64,
    pub final_h: Vec<i64>,
    pub final_v: i64,
    /// Cumulative `returns_origin` at each checkpoint of [`return_checkpoints`].
    pub return_curve: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub excursions: Option<ExcursionStats>,
}

impl WalkStats {
    /// `max_i |final_h_i|`.
    pub fn displacement(&self) -> u64 {
        self.final_h.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Times `⌊10^{i/4}⌋ ≤ T`, deduplicated, ending with `T`.
pub fn return_checkpoints(steps: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for i in 0.. {
        let t = 10f64.powf(i as f64 / 4.0).floor() as u64;
        if t >= steps {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    out.push(steps);
    out
}

/// Sampling data of one stratum.
#[derive(Debug, Clone)]
struct Level {
    p: f64,
    pq: f64,
    jumps: WeightedAliasIndex<f64>,
    /// Offsets of `μ`, `d` coordinates each, in atom order.
    offsets: Vec<i64>,
}

impl Level {
    fn new(s: &Stratum) -> Self {
        let atoms = s.mu.atoms();
        let jumps = WeightedAliasIndex::new(atoms.iter().map(|a| a.1).collect()).expect("validated pmf");
        Level { p: s.p, pq: s.p + s.q, jumps, offsets: atoms.iter().flat_map(|a| a.0.iter().copied()).collect() }
    }
}

/// One transition from `state` in stratum `lv`.
fn advance<R: Rng + ?Sized>(lv: &Level, state: &mut WalkState, rng: &mut R) {
    let u: f64 = rng.random();
    if u < lv.p {
        state.v += 1;
    } else if u < lv.pq {
        state.v -= 1;
    } else {
        let d = state.h.len();
        let k = lv.jumps.sample(rng);
        for (h, o) in state.h.iter_mut().zip(&lv.offsets[k * d..(k + 1) * d]) {
            *h += o;
        }
    }
    state.t += 1;
}

/// One step of the walk: up with probability `p_v`, down with `q_v`, and a
/// horizontal jump drawn from `μ_v` otherwise.
pub fn step<R: Rng + ?Sized>(state: &WalkState, env: &EnvironmentView, rng: &mut R) -> WalkState {
    let lv = Level::new(&env.stratum(state.v));
    let mut next = state.clone();
    advance(&lv, &mut next, rng);
    next
}

/// Strata visited by one walk, generated on first use.
struct LevelCache<'a> {
    env: &'a EnvironmentView,
    lo: i64,
    levels: Vec<Option<Level>>,
}

impl<'a> LevelCache<'a> {
    fn new(env: &'a EnvironmentView) -> Self {
        LevelCache { env, lo: -64, levels: vec![None; 129] }
    }

    fn get(&mut self, v: i64) -> &Level {
        if v < self.lo {
            let grow = (self.lo - v) as usize + self.levels.len();
            let mut fresh = vec![None; grow];
            fresh.append(&mut self.levels);
            self.levels = fresh;
            self.lo -= grow as i64;
        }
        let idx = (v - self.lo) as usize;
        if idx >= self.levels.len() {
            let target = (idx + 1).max(2 * self.levels.len());
            self.levels.resize(target, None);
        }
        let env = self.env;
        self.levels[idx].get_or_insert_with(|| Level::new(&env.stratum(v)))
    }
}

struct Recorder {
    stats: WalkStats,
    checkpoints: Vec<u64>,
    next_cp: usize,
    trace: Option<ExcursionStats>,
    on_axis: bool,
    last_sigma_h: Vec<i64>,
}

impl Recorder {
    fn new(steps: u64, d: usize, record_trace: bool) -> Self {
        Recorder {
            stats: WalkStats {
                steps,
                returns_origin: 0,
                returns_vertical: 0,
                last_return_t: 0,
                last_vertical_return_t: 0,
                max_abs_v: 0,
                final_h: vec![0; d],
                final_v: 0,
                return_curve: Vec::new(),
                excursions: None,
            },
            checkpoints: return_checkpoints(steps),
            next_cp: 0,
            trace: record_trace.then(|| ExcursionStats { sigma: vec![0], ..Default::default() }),
            on_axis: true,
            last_sigma_h: vec![0; d],
        }
    }

    fn observe(&mut self, s: &WalkState) {
        let st = &mut self.stats;
        st.max_abs_v = st.max_abs_v.max(s.v.unsigned_abs());
        if s.v == 0 {
            st.returns_vertical += 1;
            st.last_vertical_return_t = s.t;
            if s.h.iter().all(|&x| x == 0) {
                st.returns_origin += 1;
                st.last_return_t = s.t;
            }
        }
        if let Some(tr) = self.trace.as_mut() {
            match (self.on_axis, s.v == 0) {
                (true, false) => tr.tau.push(s.t),
                (false, true) => {
                    tr.sigma.push(s.t);
                    tr.d.push(s.h.iter().zip(&self.last_sigma_h).map(|(a, b)| a - b).collect());
                    self.last_sigma_h.clone_from(&s.h);
                }
                _ => {}
            }
        }
        self.on_axis = s.v == 0;
        while self.next_cp < self.checkpoints.len() && self.checkpoints[self.next_cp] == s.t {
            st.return_curve.push(st.returns_origin);
            self.next_cp += 1;
        }
    }

    fn finish(mut self, s: &WalkState) -> WalkStats {
        self.stats.final_h.clone_from(&s.h);
        self.stats.final_v = s.v;
        self.stats.excursions = self.trace;
        self.stats
    }
}

/// Runs `steps` transitions from the origin. No boundary: strata are
/// generated as the walk reaches them.
pub fn run_walk<R: Rng + ?Sized>(env: &EnvironmentView, steps: u64, rng: &mut R, record_trace: bool) -> WalkStats {
    let d = env.dimension();
    let mut cache = LevelCache::new(env);
    let mut state = WalkState::origin(d);
    let mut rec = Recorder::new(steps, d, record_trace);
    while state.t < steps {
        let lv = cache.get(state.v);
        advance(lv, &mut state, rng);
        rec.observe(&state);
    }
    rec.finish(&state)
}

/// The vertical chain: up with `p_v/(p_v+q_v)`, down otherwise. Horizontal
/// fields stay empty and `returns_origin` counts vertical returns.
pub fn run_vertical<R: Rng + ?Sized>(env: &EnvironmentView, steps: u64, rng: &mut R) -> WalkStats {
    let mut up: Vec<Option<f64>> = Vec::new();
    let mut down: Vec<Option<f64>> = Vec::new();
    let mut prob = |v: i64| -> f64 {
        let (side, i) = if v >= 0 { (&mut up, v as usize) } else { (&mut down, (-v - 1) as usize) };
        if i >= side.len() {
            side.resize(i + 1, None);
        }
        *side[i].get_or_insert_with(|| {
            let s = env.stratum(v);
            s.p / (s.p + s.q)
        })
    };
    let mut state = WalkState { h: Vec::new(), v: 0, t: 0 };
    let mut rec = Recorder::new(steps, 0, false);
    while state.t < steps {
        let u: f64 = rng.random();
        state.v += if u < prob(state.v) { 1 } else { -1 };
        state.t += 1;
        rec.observe(&state);
    }
    rec.finish(&state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, EnvironmentModel, JumpAtom, JumpLaw, RLaw, RatioLaw};
    use crate::rng::walk_stream;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn flat() -> EnvironmentView {
        build_environment(EnvironmentModel::flat(0.2)).unwrap()
    }

    /// Chi-square p-value of observed counts against expected probabilities.
    fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let stat: f64 = counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let e = n as f64 * p;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
    }

    /// Counts of (up, down, left, right) over `n` single steps from the origin.
    fn one_step_counts(env: &EnvironmentView, n: usize, seed: u64) -> [u64; 4] {
        let lv = Level::new(&env.stratum(0));
        let mut rng = walk_stream(seed);
        let mut c = [0u64; 4];
        for _ in 0..n {
            let mut s = WalkState::origin(1);
            advance(&lv, &mut s, &mut rng);
            let moved = (s.v != 0) as u32 + (s.h[0] != 0) as u32;
            assert_eq!(moved, 1, "exactly one coordinate changes");
            match (s.v, s.h[0]) {
                (1, _) => c[0] += 1,
                (-1, _) => c[1] += 1,
                (_, -1) => c[2] += 1,
                (_, 1) => c[3] += 1,
                other => panic!("unexpected move {other:?}"),
            }
        }
        c
    }

    #[test]
    fn one_step_law_flat() {
        let c = one_step_counts(&flat(), 1_000_000, 1);
        let third = 1.0 / 3.0;
        assert!(chi_square_p(&c, &[third, third, third / 2.0, third / 2.0]) > 0.001, "{c:?}");
    }

    #[test]
    fn one_step_law_skewed_stratum() {
        // a = 1/3 and r = 0.2 give p = 0.6, q = 0.2
        let m = EnvironmentModel {
            ratio_law: RatioLaw::Constant { value: 1.0 / 3.0 },
            r_law: RLaw::Constant { value: 0.2 },
            ..EnvironmentModel::flat(0.2)
        };
        let env = build_environment(m).unwrap();
        let s = env.stratum(0);
        assert!((s.p - 0.6).abs() < 1e-12 && (s.q - 0.2).abs() < 1e-12);
        let c = one_step_counts(&env, 1_000_000, 2);
        assert!(chi_square_p(&c, &[0.6, 0.2, 0.1, 0.1]) > 0.001, "{c:?}");
    }

    #[test]
    fn step_matches_transition_law() {
        let env = flat();
        let mut rng = walk_stream(3);
        let mut s = WalkState::origin(1);
        for _ in 0..1000 {
            let next = step(&s, &env, &mut rng);
            assert_eq!(next.t, s.t + 1);
            assert_eq!((next.v - s.v).abs() + (next.h[0] - s.h[0]).abs(), 1);
            s = next;
        }
    }

    #[test]
    fn two_step_returns() {
        let env = flat();
        let n = 100_000u64;
        // full walk: up-down or down-up, 2·(1/3)² = 2/9 (two horizontal
        // moves also end at v = 0 but never leave the axis)
        let hits = (0..n)
            .map(|i| run_walk(&env, 2, &mut walk_stream(i), false))
            .filter(|w| w.final_v == 0 && w.max_abs_v == 1)
            .count() as f64;
        let p = 2.0 / 9.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 4.0 * se, "{}", hits / n as f64);
        // the vertical chain is the simple symmetric walk: 1/2
        let hits = (0..n).filter(|&i| run_vertical(&env, 2, &mut walk_stream(i)).final_v == 0).count() as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((hits / n as f64 - 0.5).abs() < 4.0 * se, "{}", hits / n as f64);
    }

    #[test]
    fn dirac_jump_law_moves_right_only() {
        let m = EnvironmentModel {
            jump_law: JumpLaw::Fixed { atoms: vec![JumpAtom { offset: vec![1], weight: 1.0 }] },
            ..EnvironmentModel::flat(0.2)
        };
        let env = build_environment(m).unwrap();
        let w = run_walk(&env, 20_000, &mut walk_stream(5), true);
        let tr = w.excursions.as_ref().unwrap();
        assert!(tr.is_interleaved());
        assert!(tr.d.iter().all(|d| d[0] >= 0));
        assert!(tr.d.iter().map(|d| d[0]).sum::<i64>() <= w.final_h[0]);
        assert!(w.final_h[0] > 0);
    }

    #[test]
    fn traces_interleave_and_stats_are_consistent() {
        let env = build_environment(EnvironmentModel::sinai(2.0, 0.2, 1)).unwrap();
        for seed in 0..20 {
            let w = run_walk(&env, 50_000, &mut walk_stream(seed), true);
            let tr = w.excursions.as_ref().unwrap();
            assert!(tr.is_interleaved());
            assert_eq!(tr.d.len() + 1, tr.sigma.len());
            // σ_k (k ≥ 1) are exactly the entries onto the axis
            assert!(tr.sigma.len() as u64 - 1 <= w.returns_vertical);
            assert!(w.returns_origin <= w.returns_vertical);
            assert!(w.last_return_t <= w.steps);
            let sum: i64 = tr.d.iter().map(|d| d[0]).sum();
            let last = *tr.sigma.last().unwrap();
            if last == w.last_vertical_return_t && w.final_v == 0 {
                assert_eq!(sum, w.final_h[0]);
            }
            assert_eq!(w.return_curve.len(), return_checkpoints(w.steps).len());
            assert_eq!(*w.return_curve.last().unwrap(), w.returns_origin);
        }
    }

    #[test]
    fn interleaving_rejects_bad_traces() {
        let good = ExcursionStats { sigma: vec![0, 5], tau: vec![2, 7], d: vec![vec![1]] };
        assert!(good.is_interleaved());
        let bad = ExcursionStats { sigma: vec![0, 5], tau: vec![6], d: vec![vec![1]] };
        assert!(!bad.is_interleaved());
        let missing = ExcursionStats { sigma: vec![0, 5], tau: vec![2], d: vec![] };
        assert!(!missing.is_interleaved());
    }

    #[test]
    fn checkpoints() {
        assert_eq!(return_checkpoints(1), vec![1]);
        assert_eq!(return_checkpoints(10), vec![1, 3, 5, 10]);
        let c = return_checkpoints(1_000_000);
        assert_eq!(c.len(), 24);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*c.last().unwrap(), 1_000_000);
    }

    #[test]
    fn walk_is_reproducible() {
        let env = build_environment(EnvironmentModel::sinai(2.0, 0.2, 4)).unwrap();
        let a = run_walk(&env, 10_000, &mut walk_stream(9), true);
        let b = run_walk(&env, 10_000, &mut walk_stream(9), true);
        assert_eq!(a, b);
    }
}
