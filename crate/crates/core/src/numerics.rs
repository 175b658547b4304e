// SPDX-License-Identifier: Apache-2.0

//! Signed log-domain scalars.
//!
//! Potentials in a centered random environment span `exp(±c·√n)`, so every
//! quantity derived from them (prefix sums of `ρ`, `1/ρ`, squared dispersion
//! functions) is carried as a sign plus the natural log of its magnitude.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opposite-sign additions whose log-magnitudes differ by less than this
/// collapse to exact zero.
pub const CANCELLATION_TOL: f64 = 1e-12;

/// Largest log-magnitude that may be converted back to a plain `f64`.
pub const MAX_REAL_LMAG: f64 = 700.0;

/// Integers below `2^40` stay distinguishable from their neighbours in the
/// log representation (`ln(n+1) − ln n` spans hundreds of ulps of `ln n`),
/// and round-trip through `to_real` to within `1e-2`.
pub const EXACT_INT_LMAG: f64 = 27.725887222397812; // ln(2^40)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Neg => -1,
            Sign::Zero => 0,
            Sign::Pos => 1,
        }
    }

    fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Pos
        } else if x < 0.0 {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    fn flip(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Zero => Sign::Zero,
            Sign::Pos => Sign::Neg,
        }
    }

    fn mul(self, other: Sign) -> Sign {
        Sign::of((self.as_i8() * other.as_i8()) as f64)
    }
}

/// A real number stored as `sign · exp(lmag)`.
///
/// The zero element is `(Zero, -inf)`; every other value has a finite
/// `lmag`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "SignedLogRepr", try_from = "SignedLogRepr")]
pub struct SignedLog {
    sign: Sign,
    lmag: f64,
}

/// Wire form: `{"sign": -1|0|1, "ln_abs": f64 | null}`.
#[derive(Serialize, Deserialize)]
struct SignedLogRepr {
    sign: i8,
    ln_abs: Option<f64>,
}

impl From<SignedLog> for SignedLogRepr {
    fn from(x: SignedLog) -> Self {
        SignedLogRepr { sign: x.sign.as_i8(), ln_abs: (!x.is_zero()).then_some(x.lmag) }
    }
}

impl TryFrom<SignedLogRepr> for SignedLog {
    type Error = String;

    fn try_from(r: SignedLogRepr) -> std::result::Result<Self, String> {
        match (r.sign, r.ln_abs) {
            (0, _) => Ok(SignedLog::ZERO),
            (s @ (-1 | 1), Some(l)) if l.is_finite() => {
                Ok(SignedLog::new(if s > 0 { Sign::Pos } else { Sign::Neg }, l))
            }
            _ => Err(format!("bad signed-log value: sign {} ln_abs {:?}", r.sign, r.ln_abs)),
        }
    }
}

impl fmt::Debug for SignedLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "SignedLog(0)"),
            Sign::Pos => write!(f, "SignedLog(+e^{})", self.lmag),
            Sign::Neg => write!(f, "SignedLog(-e^{})", self.lmag),
        }
    }
}

impl Default for SignedLog {
    fn default() -> Self {
        Self::ZERO
    }
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: Sign::Zero, lmag: f64::NEG_INFINITY };
    pub const ONE: SignedLog = SignedLog { sign: Sign::Pos, lmag: 0.0 };

    /// Builds a value from its parts. A zero sign forces `lmag = -inf` and a
    /// `-inf` magnitude forces the zero sign.
    pub fn new(sign: Sign, lmag: f64) -> Self {
        debug_assert!(!lmag.is_nan(), "NaN log-magnitude");
        if sign == Sign::Zero || lmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog { sign, lmag }
        }
    }

    /// Positive value with the given log-magnitude.
    pub fn from_log(lmag: f64) -> Self {
        Self::new(Sign::Pos, lmag)
    }

    pub fn from_real(x: f64) -> Self {
        debug_assert!(x.is_finite(), "from_real on non-finite {x}");
        Self::new(Sign::of(x), x.abs().ln())
    }

    pub fn from_u64(n: u64) -> Self {
        Self::from_real(n as f64)
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn lmag(&self) -> f64 {
        self.lmag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Pos
    }

    /// Converts back to `f64`. Magnitudes above `e^700` are reported as an
    /// error rather than overflowing to infinity.
    pub fn to_real(&self) -> Result<f64> {
        match self.sign {
            Sign::Zero => Ok(0.0),
            _ if self.lmag > MAX_REAL_LMAG => Err(Error::Overflow { lmag: self.lmag }),
            s => Ok(s.as_i8() as f64 * self.lmag.exp()),
        }
    }

    /// `log10 |x|`, used by the CSV exporters.
    pub fn log10_abs(&self) -> f64 {
        self.lmag / std::f64::consts::LN_10
    }

    pub fn abs(&self) -> Self {
        Self::new(if self.is_zero() { Sign::Zero } else { Sign::Pos }, self.lmag)
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        SignedLog { sign: self.sign, lmag: -self.lmag }
    }

    pub fn square(&self) -> Self {
        if self.is_zero() {
            Self::ZERO
        } else {
            SignedLog { sign: Sign::Pos, lmag: 2.0 * self.lmag }
        }
    }

    /// Square root of a nonnegative value.
    pub fn sqrt(&self) -> Self {
        assert!(self.sign != Sign::Neg, "sqrt of negative SignedLog");
        if self.is_zero() {
            Self::ZERO
        } else {
            SignedLog { sign: Sign::Pos, lmag: 0.5 * self.lmag }
        }
    }

    pub fn powf(&self, e: f64) -> Self {
        assert!(self.sign != Sign::Neg, "powf of negative SignedLog");
        if self.is_zero() {
            Self::ZERO
        } else {
            Self::from_log(e * self.lmag)
        }
    }

    pub fn div(&self, other: SignedLog) -> Self {
        *self * other.recip()
    }

    /// Total order consistent with the order of the represented reals.
    pub fn total_cmp(&self, other: &SignedLog) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                Sign::Zero => Ordering::Equal,
                Sign::Pos => self.lmag.total_cmp(&other.lmag),
                Sign::Neg => other.lmag.total_cmp(&self.lmag),
            },
            o => o,
        }
    }

    pub fn max(self, other: SignedLog) -> SignedLog {
        if self.total_cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: SignedLog) -> SignedLog {
        if self.total_cmp(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    /// True when the value is below `2^40`, where unit steps are resolved.
    pub fn in_exact_int_range(&self) -> bool {
        self.sign != Sign::Pos || self.lmag < EXACT_INT_LMAG
    }
}

/// `a + b` by factoring out the larger magnitude.
pub fn sl_add(a: SignedLog, b: SignedLog) -> SignedLog {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    let (hi, lo) = if a.lmag >= b.lmag { (a, b) } else { (b, a) };
    let gap = lo.lmag - hi.lmag; // <= 0
    if hi.sign == lo.sign {
        SignedLog { sign: hi.sign, lmag: hi.lmag + gap.exp().ln_1p() }
    } else {
        if -gap < CANCELLATION_TOL {
            return SignedLog::ZERO;
        }
        // log(1 - e^gap), stable for gap near zero
        let l = if gap > -std::f64::consts::LN_2 { (-gap.exp_m1()).ln() } else { (-gap.exp()).ln_1p() };
        SignedLog { sign: hi.sign, lmag: hi.lmag + l }
    }
}

pub fn sl_mul(a: SignedLog, b: SignedLog) -> SignedLog {
    if a.is_zero() || b.is_zero() {
        SignedLog::ZERO
    } else {
        SignedLog { sign: a.sign.mul(b.sign), lmag: a.lmag + b.lmag }
    }
}

pub fn sl_cmp(a: SignedLog, b: SignedLog) -> Ordering {
    a.total_cmp(&b)
}

impl Add for SignedLog {
    type Output = SignedLog;
    fn add(self, rhs: SignedLog) -> SignedLog {
        sl_add(self, rhs)
    }
}

impl Sub for SignedLog {
    type Output = SignedLog;
    fn sub(self, rhs: SignedLog) -> SignedLog {
        sl_add(self, -rhs)
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        sl_mul(self, rhs)
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog { sign: self.sign.flip(), lmag: self.lmag }
    }
}

impl PartialOrd for SignedLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

/// Streaming sum with a fixed log-shift and a plain `f64` accumulator.
///
/// While all terms stay within `e^±600` of the shift the accumulator is an
/// ordinary floating sum, so sums of small integers (flat environments) are
/// exact. Residuals below `CANCELLATION_TOL` times the sum of absolute terms
/// are reported as zero.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    shift: f64,
    acc: f64,
    abs_acc: f64,
}

const RESCALE_LMAG: f64 = 600.0;

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        LogSum { shift: 0.0, acc: 0.0, abs_acc: 0.0 }
    }

    fn rescale_to(&mut self, shift: f64) {
        let f = (self.shift - shift).exp();
        self.acc *= f;
        self.abs_acc *= f;
        self.shift = shift;
    }

    pub fn add(&mut self, x: SignedLog) {
        if x.is_zero() {
            return;
        }
        if self.abs_acc == 0.0 {
            self.shift = if x.lmag.abs() <= RESCALE_LMAG { 0.0 } else { x.lmag };
        } else if x.lmag > self.shift + RESCALE_LMAG {
            self.rescale_to(x.lmag);
        }
        let mag = (x.lmag - self.shift).exp();
        self.acc += x.sign.as_i8() as f64 * mag;
        self.abs_acc += mag;
        if self.abs_acc > 0.0 && self.abs_acc < (-RESCALE_LMAG).exp() {
            let s = self.shift + self.abs_acc.ln();
            self.rescale_to(s);
        }
    }

    pub fn value(&self) -> SignedLog {
        if self.acc == 0.0 || self.acc.abs() <= CANCELLATION_TOL * self.abs_acc {
            return SignedLog::ZERO;
        }
        SignedLog::new(Sign::of(self.acc), self.shift + self.acc.abs().ln())
    }
}

/// Sums an iterator of values with a [`LogSum`].
pub fn sl_sum<I: IntoIterator<Item = SignedLog>>(it: I) -> SignedLog {
    let mut s = LogSum::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

/// Relative distance of two nonnegative values measured in the log domain:
/// `|ln a − ln b|`, with zero distance between two zeros.
pub fn log_distance(a: SignedLog, b: SignedLog) -> f64 {
    match (a.is_zero(), b.is_zero()) {
        (true, true) => 0.0,
        (false, false) if a.sign == b.sign => (a.lmag - b.lmag).abs(),
        _ => f64::INFINITY,
    }
}
