//! Dual-mode arithmetic shared by every numeric computation in this crate.
//!
//! Reference tables and regression fixtures are exact fractions, while
//! survey-derived data is inherently approximate. Both live behind the
//! [`Scalar`] trait: `BigRational` gives exact arithmetic, `f64` gives the
//! float mode with explicit tolerances.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational scalar used in rational mode.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseNumberError {
    #[error("empty numeric literal")]
    Empty,
    #[error("malformed numeric literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Field-ish scalar with ordering, parsing, and tolerance conventions.
///
/// `EXACT` distinguishes arithmetic modes: exact scalars compare with `==`
/// and use a zero pivot threshold, floats carry explicit epsilons.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
    + Signed
    + Sum
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn from_int(n: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Parses `p/q`, an integer, or a decimal literal.
    fn parse_text(text: &str) -> Result<Self, ParseNumberError>;

    /// Canonical rendering: reduced `p/q` (or bare integer) in exact mode,
    /// shortest round-trip decimal in float mode.
    fn render(&self) -> String;

    /// Threshold below which a pivot candidate counts as zero.
    fn pivot_epsilon() -> Self;

    /// Default tolerance for compatibility checks on distributions.
    fn default_tolerance() -> Self;
}

fn parse_decimal_as_rational(text: &str) -> Option<BigRational> {
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, text),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let joined = format!("{int_part}{frac_part}");
    let numer: BigInt = joined.parse().ok()?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(BigInt::from(sign) * numer, denom))
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse_text(text: &str) -> Result<Self, ParseNumberError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ParseNumberError::Empty);
        }
        if let Some((num, den)) = text.split_once('/') {
            let num: BigInt = num
                .trim()
                .parse()
                .map_err(|_| ParseNumberError::Malformed(text.to_string()))?;
            let den: BigInt = den
                .trim()
                .parse()
                .map_err(|_| ParseNumberError::Malformed(text.to_string()))?;
            if den.is_zero() {
                return Err(ParseNumberError::ZeroDenominator(text.to_string()));
            }
            return Ok(BigRational::new(num, den));
        }
        if let Ok(n) = text.parse::<BigInt>() {
            return Ok(BigRational::from_integer(n));
        }
        parse_decimal_as_rational(text).ok_or_else(|| ParseNumberError::Malformed(text.to_string()))
    }

    fn render(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn pivot_epsilon() -> Self {
        BigRational::zero()
    }

    fn default_tolerance() -> Self {
        BigRational::zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_text(text: &str) -> Result<Self, ParseNumberError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ParseNumberError::Empty);
        }
        if let Some((num, den)) = text.split_once('/') {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|_| ParseNumberError::Malformed(text.to_string()))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|_| ParseNumberError::Malformed(text.to_string()))?;
            if den == 0.0 {
                return Err(ParseNumberError::ZeroDenominator(text.to_string()));
            }
            return Ok(num / den);
        }
        text.parse::<f64>()
            .map_err(|_| ParseNumberError::Malformed(text.to_string()))
    }

    fn render(&self) -> String {
        // serde_json routes through ryu; reuse it so files and in-memory
        // renderings agree byte for byte.
        serde_json::to_string(self).unwrap_or_else(|_| self.to_string())
    }

    fn pivot_epsilon() -> Self {
        1e-12
    }

    fn default_tolerance() -> Self {
        1e-9
    }
}

/// Convenience constructor for tests and fixtures.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}
