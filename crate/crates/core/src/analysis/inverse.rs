// SPDX-License-Identifier: Apache-2.0

//! Generalized inverses `f⁻¹(x) = max{n : f(n) ≤ x}`.

use serde::{Deserialize, Serialize};

use super::phi::phi_str;
use super::pieces::{int_ceil, int_pred, int_succ};
use super::tables::PotentialTables;
use crate::error::{out_of_window, Error, Result};
use crate::numerics::{Sign, SignedLog};

/// Generalized inverse of an increasing table `f[0..]`.
///
/// Fails with `BelowRange` when `x < f(0)` and with `OutOfWindow` when
/// `x ≥ f(last)`, where the answer could lie past the table.
pub fn generalized_inverse(f: &[SignedLog], x: SignedLog) -> Result<usize> {
    let Some(last) = f.last() else {
        return Err(Error::InvalidArgument("empty table".into()));
    };
    if x < f[0] {
        return Err(Error::BelowRange(format!("{x:?} below f(0) = {:?}", f[0])));
    }
    if x >= *last {
        return Err(out_of_window("table inverse", x.lmag()));
    }
    Ok(f.partition_point(|y| *y <= x) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    Phi,
    PhiPlus,
    PhiStr,
}

impl PhiKind {
    pub fn name(self) -> &'static str {
        match self {
            PhiKind::Phi => "phi",
            PhiKind::PhiPlus => "phi_plus",
            PhiKind::PhiStr => "phi_str",
        }
    }
}

/// `f⁻¹(x)` for one of the dispersion functions, as an integer scale.
///
/// Below `f(0)` the inverse is taken to be 0. Scales above `2^40` are not
/// resolved to the unit; there the answer is accurate to relative `1e-13`.
pub fn phi_inverse(t: &PotentialTables, x: SignedLog, which: PhiKind) -> Result<SignedLog> {
    if x.sign() == Sign::Neg {
        return Err(Error::InvalidArgument("negative argument".into()));
    }
    let p = &t.pieces;
    match which {
        PhiKind::Phi => {
            t.dimension_check()?;
            step_inverse(t, &p.phi2, x.square(), which.name())
        }
        PhiKind::PhiPlus => {
            t.dimension_check()?;
            step_inverse(t, &p.phi_plus2, x.square(), which.name())
        }
        PhiKind::PhiStr => str_inverse(t, x),
    }
}

/// Inverse of the drift mass `C(n)`, meaningful when all `ε_k ≥ 0`.
pub fn drift_mass_inverse(t: &PotentialTables, x: SignedLog) -> Result<SignedLog> {
    t.dimension_check()?;
    step_inverse(t, &t.pieces.c, x, "drift mass")
}

/// Inverse of a function that is constant on each piece.
fn step_inverse(t: &PotentialTables, vals: &[SignedLog], x: SignedLog, what: &str) -> Result<SignedLog> {
    let p = &t.pieces;
    let i = vals.partition_point(|v| *v <= x);
    if i == 0 {
        return Ok(SignedLog::ZERO);
    }
    if i == p.len() {
        return Err(out_of_window(what, x.lmag()));
    }
    Ok(int_pred(p.start[i]))
}

fn str_inverse(t: &PotentialTables, y: SignedLog) -> Result<SignedLog> {
    let p = &t.pieces;
    let y2 = y.square();
    // Φ_str(start_i)² = start_i · W_i is increasing in i
    let (mut lo, mut hi) = (0, p.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if p.start[mid] * p.w[mid] <= y2 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let i = lo;
    let idx = i.max(1) - 1;
    let last_piece = idx + 1 == p.len();
    let n_est = y2.div(p.w[idx]);
    // last integer the piece can hold
    let top = int_pred(int_ceil(p.end(idx)));

    if !n_est.in_exact_int_range() {
        if n_est >= top {
            if last_piece {
                return Err(out_of_window("phi_str", y.lmag()));
            }
            return Ok(top);
        }
        return Ok(n_est);
    }

    let mut n = if n_est >= top {
        if last_piece {
            return Err(out_of_window("phi_str", y.lmag()));
        }
        top
    } else {
        SignedLog::from_real(n_est.to_real()?.floor())
    };
    // exact check against the forward evaluation
    for _ in 0..64 {
        if !n.is_zero() && phi_str(t, n)? > y {
            n = int_pred(n);
            continue;
        }
        let next = int_succ(n);
        if next >= p.cap {
            return Err(out_of_window("phi_str", y.lmag()));
        }
        if phi_str(t, next)? <= y {
            n = next;
            continue;
        }
        return Ok(n);
    }
    Err(Error::InvalidArgument(format!("phi_str inverse did not settle at {y:?}")))
}

impl PotentialTables {
    pub(crate) fn dimension_check(&self) -> Result<()> {
        if self.dimension != 1 {
            return Err(Error::DimensionUnsupported(self.dimension));
        }
        Ok(())
    }
}
