//! Exact rational numbers for thresholds and objective values.
//!
//! Values are [`num_rational::BigRational`], always kept in lowest terms with a
//! positive denominator. The textual form is always `num/den`, including for
//! integers (`0/1`, `7/1`).

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn ratio(numer: u64, denom: u64) -> Rational {
    assert!(denom != 0, "zero denominator");
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: u64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `num/den` or a bare integer. The result is reduced.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Malformed(format!("not a rational number: {text:?}"));
    let (numer, denom) = match text.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (text, "1"),
    };
    let numer: BigInt = numer.parse().map_err(|_| bad())?;
    let denom: BigInt = denom.parse().map_err(|_| bad())?;
    if denom.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(numer, denom))
}

/// `floor(r)` as `u64`, saturating at `u64::MAX`; negative values map to 0.
pub fn floor_u64(r: &Rational) -> u64 {
    to_u64_saturating(&r.floor().to_integer())
}

/// `ceil(r)` as `u64`, saturating at `u64::MAX`; negative values map to 0.
pub fn ceil_u64(r: &Rational) -> u64 {
    to_u64_saturating(&r.ceil().to_integer())
}

fn to_u64_saturating(v: &BigInt) -> u64 {
    match v.sign() {
        Sign::Minus => 0,
        _ => v.to_u64().unwrap_or(u64::MAX),
    }
}

pub fn lcm_big(values: impl IntoIterator<Item = u64>) -> BigUint {
    values
        .into_iter()
        .fold(BigUint::from(1u32), |acc, v| acc.lcm(&BigUint::from(v)))
}
