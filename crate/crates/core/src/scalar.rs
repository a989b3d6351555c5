//! Coefficient fields.
//!
//! Everything in the formal layer is generic over [`Scalar`], which is
//! implemented for double-precision complex numbers ([`C64`]) and for exact
//! Gaussian rationals ([`Cq`]). The exact field is what the truncation-depth
//! experiments run on; the numeric engine uses `C64` throughout.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;
use thiserror::Error;

pub type C64 = Complex<f64>;
/// Exact complex numbers with rational real and imaginary parts.
pub type Cq = Complex<BigRational>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarParseError {
    #[error("cannot parse `{0}` as a rational number")]
    BadRational(String),
    #[error("expected a number or numeric string, found {0}")]
    BadJson(String),
}

pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for fields where equality is decidable exactly.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_parts(re: f64, im: f64) -> Self;
    /// Nearest field element to `z`. Exact fields round to a Gaussian rational
    /// with a bounded denominator; callers must verify whatever identity they
    /// need afterwards.
    fn approximate(z: C64) -> Self;
    fn to_c64(&self) -> C64;
    fn is_zero(&self) -> bool;
    /// Size used for pivoting and tolerance decisions.
    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }
    /// Zero test with a float tolerance. Exact fields ignore `tol`.
    fn negligible(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.magnitude() <= tol
        }
    }
    fn near(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            let scale = 1.0_f64.max(self.magnitude()).max(other.magnitude());
            (self.clone() - other.clone()).magnitude() <= tol * scale
        }
    }
    fn to_json(&self) -> [Value; 2];
    fn from_json(re: &Value, im: &Value) -> Result<Self, ScalarParseError>;
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_i64(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        C64::new(num as f64 / den as f64, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        C64::new(re, im)
    }
    fn approximate(z: C64) -> Self {
        z
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn to_json(&self) -> [Value; 2] {
        [json_f64(self.re), json_f64(self.im)]
    }
    fn from_json(re: &Value, im: &Value) -> Result<Self, ScalarParseError> {
        Ok(C64::new(json_to_f64(re)?, json_to_f64(im)?))
    }
}

impl Scalar for Cq {
    const EXACT: bool = true;

    fn zero() -> Self {
        Cq::new(BigRational::zero(), BigRational::zero())
    }
    fn one() -> Self {
        Cq::new(BigRational::one(), BigRational::zero())
    }
    fn from_i64(n: i64) -> Self {
        Cq::new(BigRational::from_integer(n.into()), BigRational::zero())
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Cq::new(
            BigRational::new(num.into(), den.into()),
            BigRational::zero(),
        )
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Cq::new(rational_from_f64(re), rational_from_f64(im))
    }
    fn approximate(z: C64) -> Self {
        Cq::new(
            rationalize(z.re, 1_000_000),
            rationalize(z.im, 1_000_000),
        )
    }
    fn to_c64(&self) -> C64 {
        C64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn to_json(&self) -> [Value; 2] {
        [
            Value::String(format_rational(&self.re)),
            Value::String(format_rational(&self.im)),
        ]
    }
    fn from_json(re: &Value, im: &Value) -> Result<Self, ScalarParseError> {
        Ok(Cq::new(json_to_rational(re)?, json_to_rational(im)?))
    }
}

fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(x.to_string()))
}

fn json_to_f64(v: &Value) -> Result<f64, ScalarParseError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| ScalarParseError::BadJson(v.to_string())),
        Value::String(s) => {
            if let Ok(x) = s.trim().parse::<f64>() {
                Ok(x)
            } else {
                parse_rational(s).map(|q| q.to_f64().unwrap_or(f64::NAN))
            }
        }
        _ => Err(ScalarParseError::BadJson(v.to_string())),
    }
}

fn json_to_rational(v: &Value) -> Result<BigRational, ScalarParseError> {
    match v {
        // The JSON text of a number is a decimal literal, so it converts exactly.
        Value::Number(n) => parse_rational(&n.to_string()),
        Value::String(s) => parse_rational(s),
        _ => Err(ScalarParseError::BadJson(v.to_string())),
    }
}

/// Parses `"3"`, `"-1/3"`, `"0.25"` or `"1.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, ScalarParseError> {
    let s = text.trim();
    let bad = || ScalarParseError::BadRational(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(joined.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(10.into());
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// `"p/q"` or `"p"` for integers.
pub fn format_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact binary value of a finite double.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

/// Best rational approximation with denominator at most `max_den`
/// (continued fractions).
pub fn rationalize(x: f64, max_den: i64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let negative = x < 0.0;
    let mut rem = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    for _ in 0..64 {
        let a = rem.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den as i128 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rem - a as f64;
        if frac < 1e-15 {
            break;
        }
        rem = 1.0 / frac;
    }
    if q1 == 0 {
        return BigRational::zero();
    }
    let q = BigRational::new(BigInt::from(p1), BigInt::from(q1));
    if negative {
        -q
    } else {
        q
    }
}

/// Distance from a complex number to the nearest Gaussian integer with zero
/// imaginary part, i.e. how far `z` is from lying in `Z`.
pub fn distance_to_integer(z: C64) -> f64 {
    let re = (z.re - z.re.round()).abs();
    re.hypot(z.im)
}

/// Exact integrality test for Gaussian rationals.
pub fn is_rational_integer(z: &Cq) -> bool {
    z.im.is_zero() && z.re.is_integer()
}

pub fn abs_rational(q: &BigRational) -> BigRational {
    q.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_literals() {
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("-1/3").unwrap(), BigRational::new((-1).into(), 3.into()));
        assert_eq!(parse_rational("1.5e-3").unwrap(), BigRational::new(3.into(), 2000.into()));
        assert_eq!(parse_rational("7").unwrap(), BigRational::from_integer(7.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn rationalize_recovers_small_denominators() {
        assert_eq!(rationalize(1.0 / 3.0, 1000), BigRational::new(1.into(), 3.into()));
        assert_eq!(rationalize(-0.625, 1000), BigRational::new((-5).into(), 8.into()));
        assert_eq!(rationalize(2.0, 10), BigRational::from_integer(2.into()));
    }

    #[test]
    fn exact_json_round_trip() {
        let z = Cq::new(BigRational::new(1.into(), 3.into()), BigRational::new((-2).into(), 7.into()));
        let [re, im] = z.to_json();
        assert_eq!(Cq::from_json(&re, &im).unwrap(), z);
        // Plain JSON numbers are read through their decimal text.
        let v: Value = serde_json::from_str("0.1").unwrap();
        let q = Cq::from_json(&v, &Value::from(0)).unwrap();
        assert_eq!(q.re, BigRational::new(1.into(), 10.into()));
    }

    #[test]
    fn float_near_is_relative() {
        let a = C64::new(1e6, 0.0);
        let b = C64::new(1e6 + 1e-4, 0.0);
        assert!(a.near(&b, 1e-9));
        assert!(!C64::new(0.0, 0.0).near(&C64::new(1e-3, 0.0), 1e-9));
    }
}
