//! Exact rational scalars and their `"p/q"` wire format.
//!
//! Everything in the lattice engine is a [`BigRational`]; floating point
//! never enters a cohomology-level decision.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational scalar used throughout the lattice engine.
pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer part in rational literal `{0}`")]
    BadInteger(String),
    #[error("zero denominator in rational literal `{0}`")]
    ZeroDenominator(String),
}

/// Build a rational from an integer pair, e.g. `rat(3, 2)` = 3/2.
///
/// Panics on a zero denominator; intended for literals in code and tests.
pub fn rat(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Shorthand for an integer rational.
pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parse the `"p/q"` wire format; a bare integer string is also accepted.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let (num_str, den_str) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let num: BigInt = num_str
        .parse()
        .map_err(|_| ParseRationalError::BadInteger(s.to_string()))?;
    let den: BigInt = match den_str {
        Some(d) => d
            .parse()
            .map_err(|_| ParseRationalError::BadInteger(s.to_string()))?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(ParseRationalError::ZeroDenominator(s.to_string()));
    }
    Ok(BigRational::new(num, den))
}

/// Render in the `"p/q"` wire format (`"p"` when the denominator is 1).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest `f64` to an exact rational.
pub fn to_f64(r: &Rational) -> f64 {
    // Ratio of bigint magnitudes; adequate for the dynamic range seen here.
    let num = r.numer();
    let den = r.denom();
    let (n, d) = (big_to_f64(num), big_to_f64(den));
    n / d
}

fn big_to_f64(b: &BigInt) -> f64 {
    // BigInt -> f64 via decimal string round-trips exactly for |b| < 2^53
    // and rounds correctly far beyond the magnitudes this crate produces.
    b.to_string().parse::<f64>().unwrap_or(if b.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

/// Exact square root test: `Some(r)` iff `x == r*r` with `r >= 0`.
pub fn exact_sqrt(x: &Rational) -> Option<Rational> {
    if x.is_negative() {
        return None;
    }
    if x.is_zero() {
        return Some(Rational::zero());
    }
    let num = num_integer::Roots::sqrt(x.numer());
    let den = num_integer::Roots::sqrt(x.denom());
    if &(&num * &num) == x.numer() && &(&den * &den) == x.denom() {
        Some(BigRational::new(num, den))
    } else {
        None
    }
}
