// SPDX-License-Identifier: Apache-2.0

//! Step structure of the scale-indexed functions.
//!
//! As a function of the scale `n`, the level counts `a = v_-⁻¹(n)` and
//! `b = v_+⁻¹(n)` only change when `n` crosses a value of `v_+` or `v_-`.
//! Between two consecutive crossings every dispersion function is either
//! constant (`Φ`, `Φ_+`, drift mass) or of the form `√(n·W)` (`Φ_str`), so
//! the inverses reduce to a search over pieces.

use rayon::prelude::*;

use super::tables::PotentialTables;
use crate::numerics::{SignedLog, EXACT_INT_LMAG};

#[derive(Debug, Clone, Default)]
pub(crate) struct Pieces {
    /// Smallest scale in each piece; an integer in the exact range.
    pub start: Vec<SignedLog>,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub phi2: Vec<SignedLog>,
    pub phi_plus2: Vec<SignedLog>,
    /// `Σ_{-a≤k≤b} 1/ρ_k`.
    pub w: Vec<SignedLog>,
    pub c: Vec<SignedLog>,
    /// Scales at or above `cap` cannot be resolved inside the window.
    pub cap: SignedLog,
    pub phi_decreases: usize,
    pub phi_plus_decreases: usize,
}

/// Smallest integer `≥ x` in the exact range, in the same comparison order
/// the forward evaluations use. Larger values are returned unchanged.
pub(crate) fn int_ceil(x: SignedLog) -> SignedLog {
    if !x.is_positive() {
        return SignedLog::ZERO;
    }
    if x.lmag() >= EXACT_INT_LMAG {
        return x;
    }
    let mut c = x.to_real().expect("exact range").ceil();
    while c >= 1.0 && SignedLog::from_real(c - 1.0) >= x {
        c -= 1.0;
    }
    while SignedLog::from_real(c) < x {
        c += 1.0;
    }
    SignedLog::from_real(c)
}

/// `n - 1` in the exact range; identity above it.
pub(crate) fn int_pred(n: SignedLog) -> SignedLog {
    if n.in_exact_int_range() {
        SignedLog::from_real((n.to_real().expect("exact range").round() - 1.0).max(0.0))
    } else {
        n
    }
}

/// `n + 1` in the exact range; identity above it.
pub(crate) fn int_succ(n: SignedLog) -> SignedLog {
    if n.in_exact_int_range() {
        SignedLog::from_real(n.to_real().expect("exact range").round() + 1.0)
    } else {
        n
    }
}

impl Pieces {
    pub(crate) fn build(t: &PotentialTables) -> Pieces {
        let vr = &t.right.v;
        let vm = &t.v_minus;
        let cap = vr[vr.len() - 1].min(vm.last().copied().unwrap_or(SignedLog::ZERO));

        // (threshold, a, b) after each crossing, merged in scale order
        let mut events: Vec<(SignedLog, u32, u32)> = vec![(SignedLog::ZERO, 0, 0)];
        let (mut i, mut j) = (1usize, 1usize);
        let (mut a, mut b) = (0u32, 0u32);
        loop {
            let next_r = vr.get(i).copied().filter(|x| *x < cap);
            let next_l = vm.get(j).copied().filter(|x| *x < cap);
            let x = match (next_r, next_l) {
                (None, None) => break,
                (Some(r), None) => r,
                (None, Some(l)) => l,
                (Some(r), Some(l)) => r.min(l),
            };
            while vr.get(i).is_some_and(|v| *v <= x) {
                b = i as u32;
                i += 1;
            }
            while vm.get(j).is_some_and(|v| *v <= x) {
                a = j as u32;
                j += 1;
            }
            events.push((x, a, b));
        }

        // pieces sharing an integer start collapse onto the last of them
        let mut kept: Vec<(SignedLog, u32, u32)> = Vec::with_capacity(events.len());
        for (x, a, b) in events {
            let s = int_ceil(x);
            match kept.last_mut() {
                Some(last) if last.0 == s => *last = (s, a, b),
                _ => kept.push((s, a, b)),
            }
        }

        let values: Vec<(SignedLog, SignedLog, SignedLog, SignedLog)> = kept
            .par_iter()
            .map(|&(_, a, b)| {
                let (a, b) = (a as usize, b as usize);
                let phi2 = if t.dimension == 1 { t.phi2_levels(a, b) } else { SignedLog::ZERO };
                let phi_plus2 = if t.dimension == 1 { t.phi_plus2_levels(a, b) } else { SignedLog::ZERO };
                (phi2, phi_plus2, t.inv_rho_sum(a, b), t.drift_mass(a, b))
            })
            .collect();

        let mut p = Pieces { cap, ..Default::default() };
        for (&(s, a, b), &(phi2, phi_plus2, w, c)) in kept.iter().zip(&values) {
            if let (Some(prev), Some(prev_plus)) = (p.phi2.last(), p.phi_plus2.last()) {
                p.phi_decreases += (phi2 < *prev) as usize;
                p.phi_plus_decreases += (phi_plus2 < *prev_plus) as usize;
            }
            p.start.push(s);
            p.a.push(a);
            p.b.push(b);
            p.phi2.push(phi2);
            p.phi_plus2.push(phi_plus2);
            p.w.push(w);
            p.c.push(c);
        }
        p
    }

    pub(crate) fn len(&self) -> usize {
        self.start.len()
    }

    /// Integer scales in piece `i` are `start[i] .. end(i)` (exclusive).
    pub(crate) fn end(&self, i: usize) -> SignedLog {
        self.start.get(i + 1).copied().unwrap_or(self.cap)
    }
}
