//! Exact rational helpers: parsing user input, natural logarithms of
//! arbitrarily large rationals, and the `"num/den"` string encoding used by
//! every serialized format.

use std::f64::consts::LN_2;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `2^e` as an exact rational.
pub fn pow2(e: i64) -> Rational {
    let mag = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, i| acc * i)
}

/// Natural log of a nonzero unsigned big integer, accurate to a few ulps
/// regardless of magnitude.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().map_or(f64::NAN, |v| (v as f64).ln());
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).ln() + shift as f64 * LN_2
}

/// Natural log of a rational; `-inf` for zero, NaN for negative values.
pub fn ln_rational(x: &Rational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    if x.is_negative() {
        return f64::NAN;
    }
    ln_biguint(x.numer().magnitude()) - ln_biguint(x.denom().magnitude())
}

pub fn log10_rational(x: &Rational) -> f64 {
    ln_rational(x) / std::f64::consts::LN_10
}

/// Nearest binary64 value, saturating to 0 or infinity outside the range.
pub fn to_f64(x: &Rational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    let ln = ln_rational(&x.abs());
    if ln.abs() < 700.0 {
        if let (Some(n), Some(d)) = (x.numer().to_f64(), x.denom().to_f64()) {
            if n.is_finite() && d.is_finite() && d != 0.0 {
                return n / d;
            }
        }
    }
    sign * ln.exp()
}

/// Exact rational value of a finite binary64 number.
pub fn from_f64(v: f64) -> Result<Rational> {
    Rational::from_float(v).ok_or_else(|| Error::NonFinite(v.to_string()))
}

/// Parse an exact rational from `"2^-24"`, `"num/den"`, a plain decimal
/// (`"0.125"`) or scientific notation (`"1.5e-3"`). Decimals are read digit
/// by digit, never through binary64.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let err = || Error::Parse(format!("not a rational: {s:?}"));
    if s.is_empty() {
        return Err(err());
    }
    if let Some((base, exp)) = s.split_once('^') {
        let base: Rational = parse_rational(base)?;
        let exp: i64 = exp.trim().parse().map_err(|_| err())?;
        if base.is_zero() && exp < 0 {
            return Err(err());
        }
        if exp.unsigned_abs() > 1_000_000 {
            return Err(Error::Parse(format!("exponent too large in {s:?}")));
        }
        let p = num_traits::pow(base.clone(), exp.unsigned_abs() as usize);
        return Ok(if exp < 0 { p.recip() } else { p });
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(n / d);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    if exp.unsigned_abs() > 100_000 {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mag = BigInt::parse_bytes(if digits.is_empty() { b"0" } else { digits.as_bytes() }, 10)?;
    let scale = exp - frac_part.len() as i64;
    let ten = Rational::from_integer(BigInt::from(10));
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    let mut v = Rational::from_integer(if neg { -mag } else { mag });
    if scale >= 0 {
        v *= factor;
    } else {
        v /= factor;
    }
    Some(v)
}

/// Parse a positive integer count, accepting `"1e9"`, `"10^9"` and plain digits.
/// The value must be an exact integer.
pub fn parse_count(s: &str) -> Result<u64> {
    let v = parse_rational(s)?;
    if !v.is_integer() || v.is_negative() {
        return Err(Error::Parse(format!("not a nonnegative integer: {s:?}")));
    }
    v.to_integer()
        .to_u64()
        .ok_or_else(|| Error::CountOverflow(format!("{s} does not fit in 64 bits")))
}

/// Canonical `"num/den"` encoding (denominator always present).
pub fn to_ratio_string(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn is_positive(x: &Rational) -> bool {
    x.numer().sign() == Sign::Plus && !x.is_zero()
}

/// Serde adapter writing rationals as `"num/den"` strings.
pub mod ratio_str {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_ratio_string(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(de::Error::custom)
    }
}

pub mod ratio_str_vec {
    use super::*;
    use serde::{de, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        v: &Option<Vec<Rational>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for x in items {
                    seq.serialize_element(&to_ratio_string(x))?;
                }
                seq.end()
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Vec<Rational>>, D::Error> {
        let raw: Option<Vec<String>> = Option::deserialize(d)?;
        raw.map(|items| {
            items
                .iter()
                .map(|s| parse_rational(s).map_err(de::Error::custom))
                .collect()
        })
        .transpose()
    }
}
