//! Arithmetic abstraction for the solver.
//!
//! The growth engine, pruning and certificate checks are generic over the
//! scalar type. Two instantiations are supported:
//!
//! * `f64` — the default mode; tightness and certificate tests compare with
//!   small absolute slacks to absorb accumulated rounding.
//! * [`BigRational`] — an exact mode in which every comparison has zero
//!   slack, so the dual certificate is exact. Costs are taken from the
//!   decimal literals of the instance file (see [`rational_from_decimal`]),
//!   never through an intermediate float.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Scalar used for costs, potentials and dual values.
pub trait Weight:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    /// True when arithmetic is exact and all slacks are zero.
    const EXACT: bool;

    fn zero() -> Self;
    fn is_zero(&self) -> bool;

    /// Exact conversion from a finite float (used for in-memory instances).
    fn from_f64(x: f64) -> Self;
    fn from_count(n: usize) -> Self;
    fn to_f64(&self) -> f64;

    /// Multiply by a small non-negative count.
    fn scale(&self, k: usize) -> Self;
    /// Divide by a small positive count (1 or 2 in practice).
    fn div_count(&self, k: u32) -> Self;

    /// Total order; weights are never NaN.
    fn total_cmp(&self, other: &Self) -> Ordering;

    /// Slack for tightness tests inside the growth loop.
    fn tight_slack() -> Self;
    /// Slack for certificate inequalities (accumulates over a whole run).
    fn cert_slack() -> Self;

    fn max_with(self, other: Self) -> Self {
        if self.total_cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

impl Weight for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn scale(&self, k: usize) -> Self {
        self * k as f64
    }
    fn div_count(&self, k: u32) -> Self {
        self / f64::from(k)
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }
    fn tight_slack() -> Self {
        1e-9
    }
    fn cert_slack() -> Self {
        1e-6
    }
}

impl Weight for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite cost")
    }
    fn from_count(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn scale(&self, k: usize) -> Self {
        self * BigRational::from_integer(BigInt::from(k))
    }
    fn div_count(&self, k: u32) -> Self {
        self / BigRational::from_integer(BigInt::from(k))
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn tight_slack() -> Self {
        Zero::zero()
    }
    fn cert_slack() -> Self {
        Zero::zero()
    }
}

/// Parses a JSON number literal (`-12.5e-1` style) into an exact rational.
///
/// This is the entry point for exact-arithmetic runs: the decimal text of the
/// instance file is the authoritative value, not its nearest float.
pub fn rational_from_decimal(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let (sign, rest) = match text.strip_prefix('-') {
        Some(r) => (-1, r),
        None => (1, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exp) = match rest.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = rest[pos + 1..].parse().ok()?;
            (&rest[..pos], e)
        }
        None => (rest, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: String = [int_part, frac_part].concat();
    let numer: BigInt = digits.parse().ok()?;
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let value = if shift >= 0 {
        BigRational::from_integer(numer * ten.pow(shift as u32))
    } else {
        BigRational::new(numer, ten.pow((-shift) as u32))
    };
    Some(value * BigRational::from_integer(BigInt::from(sign)))
}

/// True when `a <= b + slack`.
pub fn leq_with_slack<W: Weight>(a: &W, b: &W, slack: &W) -> bool {
    let bound = b.clone() + slack.clone();
    a.total_cmp(&bound) != Ordering::Greater
}

/// Signed violation amount of `a <= b` (positive means violated), as f64.
pub fn violation_amount<W: Weight>(a: &W, b: &W) -> f64 {
    if a.total_cmp(b) == Ordering::Greater {
        (a.clone() - b.clone()).to_f64()
    } else {
        -((b.clone() - a.clone()).to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let r = rational_from_decimal("0.1").unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(1), BigInt::from(10)));
        // The float 0.1 is not 1/10; the decimal parse must not go through f64.
        assert_ne!(r, BigRational::from_float(0.1).unwrap());

        assert_eq!(rational_from_decimal("3"), Some(BigRational::from_integer(BigInt::from(3))));
        assert_eq!(
            rational_from_decimal("-12.5e-1"),
            Some(BigRational::new(BigInt::from(-5), BigInt::from(4)))
        );
        assert_eq!(
            rational_from_decimal("2E3"),
            Some(BigRational::from_integer(BigInt::from(2000)))
        );
        assert_eq!(rational_from_decimal(""), None);
        assert_eq!(rational_from_decimal("abc"), None);
    }

    #[test]
    fn float_round_trip_through_rational_is_exact() {
        for x in [0.0, 1.5, 3.25, 1e-9, 123456.789] {
            assert_eq!(BigRational::from_f64(x).to_f64(), x);
        }
    }
}
