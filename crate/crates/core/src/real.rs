//! Formula values: exact rationals where the structure allows it, `f64` otherwise.
//!
//! Everything generated from Hamming counts, tree lengths and rational
//! constants stays exact; Hilbert norms and anything that overflows `i64`
//! falls back to floating point.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = Ratio<i64>;

/// Parses `"3"`, `"-2/5"` or a finite decimal such as `"0.125"` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        let den: i64 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = digits.parse().ok()?;
    let den: i64 = 10i64.checked_pow(frac_part.len() as u32)?;
    let r = Rational::new(num, den);
    Some(if neg { -r } else { r })
}

/// Canonical text for a rational: `3`, `-1/2`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        format!("{}", r.to_integer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Serialized as `{"exact": "3/5", "value": 0.6}`; approximate values omit `exact`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(into = "RealRepr", try_from = "RealRepr")]
pub enum Real {
    Exact(Rational),
    Approx(f64),
}

#[derive(Serialize, Deserialize)]
struct RealRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<String>,
    value: f64,
}

impl From<Real> for RealRepr {
    fn from(r: Real) -> Self {
        RealRepr {
            exact: r.as_exact().map(|q| format_rational(&q)),
            value: r.to_f64(),
        }
    }
}

impl TryFrom<RealRepr> for Real {
    type Error = String;
    fn try_from(r: RealRepr) -> std::result::Result<Self, String> {
        match r.exact {
            Some(text) => parse_rational(&text)
                .map(Real::Exact)
                .ok_or_else(|| format!("not a rational: {text}")),
            None => Ok(Real::Approx(r.value)),
        }
    }
}

impl Default for Real {
    fn default() -> Self {
        Real::zero()
    }
}

#[allow(clippy::should_implement_trait)]
impl Real {
    pub fn zero() -> Self {
        Real::Exact(Rational::zero())
    }

    pub fn int(n: i64) -> Self {
        Real::Exact(Rational::from_integer(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Real::Exact(Rational::new(n, d))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Real::Exact(r) => rational_to_f64(&r),
            Real::Approx(x) => x,
        }
    }

    pub fn as_exact(self) -> Option<Rational> {
        match self {
            Real::Exact(r) => Some(r),
            Real::Approx(_) => None,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Real::Exact(_))
    }

    fn lift(self, other: Real, exact: impl Fn(&Rational, &Rational) -> Option<Rational>, approx: impl Fn(f64, f64) -> f64) -> Real {
        if let (Real::Exact(a), Real::Exact(b)) = (self, other) {
            if let Some(r) = exact(&a, &b) {
                return Real::Exact(r);
            }
        }
        Real::Approx(approx(self.to_f64(), other.to_f64()))
    }

    pub fn add(self, other: Real) -> Real {
        self.lift(other, |a, b| a.checked_add(b), |a, b| a + b)
    }

    pub fn sub(self, other: Real) -> Real {
        self.lift(other, |a, b| a.checked_sub(b), |a, b| a - b)
    }

    pub fn mul(self, other: Real) -> Real {
        self.lift(other, |a, b| a.checked_mul(b), |a, b| a * b)
    }

    pub fn half(self) -> Real {
        match self {
            Real::Exact(r) => match r.denom().checked_mul(&2) {
                Some(d) => Real::Exact(Rational::new(*r.numer(), d)),
                None => Real::Approx(rational_to_f64(&r) / 2.0),
            },
            Real::Approx(x) => Real::Approx(x / 2.0),
        }
    }

    pub fn abs(self) -> Real {
        match self {
            Real::Exact(r) => Real::Exact(r.abs()),
            Real::Approx(x) => Real::Approx(x.abs()),
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Real::Exact(r) => r.is_negative(),
            Real::Approx(x) => x < 0.0,
        }
    }

    /// `max(self - other, 0)`.
    pub fn monus(self, other: Real) -> Real {
        self.sub(other).max(Real::zero())
    }

    pub fn abs_diff(self, other: Real) -> Real {
        self.sub(other).abs()
    }

    pub fn min(self, other: Real) -> Real {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Real) -> Real {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Equality within `tol`; exact operands compare exactly.
    pub fn approx_eq(self, other: Real, tol: f64) -> bool {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a == b,
            _ => (self.to_f64() - other.to_f64()).abs() <= tol,
        }
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl From<Rational> for Real {
    fn from(r: Rational) -> Self {
        Real::Exact(r)
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::Approx(x)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) => f.write_str(&format_rational(r)),
            Real::Approx(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.125"), Some(Rational::new(1, 8)));
        assert_eq!(parse_rational("-3/6"), Some(Rational::new(-1, 2)));
        assert_eq!(parse_rational("7"), Some(Rational::from_integer(7)));
        assert_eq!(parse_rational(".5"), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Real::ratio(3, 5);
        let b = Real::ratio(2, 5);
        assert_eq!(a.monus(b), Real::ratio(1, 5));
        assert_eq!(b.monus(a), Real::zero());
        assert_eq!(a.half(), Real::ratio(3, 10));
        assert!(a.add(b).is_exact());
    }

    #[test]
    fn overflow_degrades_to_float() {
        let big = Real::Exact(Rational::from_integer(i64::MAX - 1));
        let sum = big.add(big);
        assert!(!sum.is_exact());
        assert!(sum.to_f64() > 0.0);
    }

    #[test]
    fn mixed_comparison_uses_floats() {
        assert!(Real::Approx(0.5) < Real::ratio(2, 3));
        assert_eq!(Real::Approx(0.5), Real::ratio(1, 2));
    }

    #[test]
    fn serde_round_trip() {
        let a = Real::ratio(3, 5);
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, r#"{"exact":"3/5","value":0.6}"#);
        assert_eq!(serde_json::from_str::<Real>(&text).unwrap(), a);
        let b = Real::Approx(1.25);
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(text, r#"{"value":1.25}"#);
        assert_eq!(serde_json::from_str::<Real>(&text).unwrap(), b);
    }
}
