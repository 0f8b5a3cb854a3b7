//! Exact rational scalars and the small field abstraction shared by the LP code.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact scalar used throughout the library.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Exact dyadic conversion. Non-finite input is rejected.
pub fn from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

pub fn to_f64(x: &Q) -> f64 {
    ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}

pub fn min_q(a: &Q, b: &Q) -> Q {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn max_q(a: &Q, b: &Q) -> Q {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn pos_part(x: &Q) -> Q {
    if x.is_positive() {
        x.clone()
    } else {
        Q::zero()
    }
}

/// Arithmetic needed by the simplex and the chain equations. `f64` compares
/// against a fixed tolerance, `Q` is exact.
pub trait Field:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    fn from_q(x: &Q) -> Self;
    fn to_q(&self) -> Q;
    fn as_f64(&self) -> f64;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_exact_zero(&self) -> bool;
    fn is_zero_tol(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    fn sub_mul_assign(&mut self, f: &Self, x: &Self);
    /// Slack allowed in the ratio test; zero for exact fields.
    fn harris_tol() -> Self;
}

pub const F64_EPS: f64 = 1e-9;

impl Field for f64 {
    fn from_q(x: &Q) -> Self {
        to_f64(x)
    }
    fn to_q(&self) -> Q {
        from_f64(*self).unwrap_or_else(Q::zero)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn is_pos(&self) -> bool {
        *self > F64_EPS
    }
    fn is_neg(&self) -> bool {
        *self < -F64_EPS
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    #[inline]
    fn sub_mul_assign(&mut self, f: &Self, x: &Self) {
        *self -= f * x;
    }
    fn harris_tol() -> Self {
        F64_EPS
    }
}

impl Field for Q {
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn to_q(&self) -> Q {
        self.clone()
    }
    fn as_f64(&self) -> f64 {
        to_f64(self)
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn is_exact_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn sub_mul_assign(&mut self, f: &Self, x: &Self) {
        if !Zero::is_zero(x) {
            *self -= f * x;
        }
    }
    fn harris_tol() -> Self {
        Zero::zero()
    }
}

/// Renders a rational with 12 significant digits.
pub fn fmt12(x: &Q) -> String {
    fmt_sig(to_f64(x), 12)
}

pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", digits - 1, x);
    let v: f64 = s.parse().unwrap_or(x);
    let mag = v.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        let t = format!("{:.*}", decimals, v);
        if t.contains('.') {
            t.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            t
        }
    } else {
        s
    }
}
