use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::LedgerError;

/// Exact rational scalar used throughout the ledger.
pub type Q = BigRational;

/// Largest decimal exponent accepted by [`parse_rational`]; keeps hostile
/// inputs such as `1e999999999` from allocating huge integers.
const MAX_EXPONENT: i64 = 4096;
const MAX_DIGITS: usize = 4096;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational value of a finite binary float.
pub fn from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

pub fn max(a: &Q, b: &Q) -> Q {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn midpoint(a: &Q, b: &Q) -> Q {
    (a + b) / int(2)
}

/// Parses a rational literal.
///
/// Accepted forms: an optional sign followed by a decimal number with an
/// optional fraction and exponent (`5.5`, `-1e-3`, `2.25E+1`), or a quotient
/// of two such numbers (`11/2`, `1.5/4`). Decimal literals are converted
/// exactly, so `0.1` is `1/10` and not the nearest binary float.
pub fn parse_rational(input: &str) -> Result<Q, LedgerError> {
    let err = |reason: &str| LedgerError::Parse {
        input: input.chars().take(64).collect(),
        reason: reason.to_string(),
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty input"));
    }
    let mut parts = s.splitn(2, '/');
    let num = parse_decimal(parts.next().unwrap_or("")).map_err(&err)?;
    match parts.next() {
        None => Ok(num),
        Some(den) => {
            let den = parse_decimal(den).map_err(&err)?;
            if den.is_zero() {
                return Err(err("zero denominator"));
            }
            Ok(num / den)
        }
    }
}

fn parse_decimal(s: &str) -> Result<Q, &'static str> {
    let s = s.trim();
    let (negative, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        Some(_) => (false, s),
        None => return Err("missing number"),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => {
            let exp: i64 = body[i + 1..].parse().map_err(|_| "bad exponent")?;
            (&body[..i], exp)
        }
        None => (body, 0),
    };
    if !(-MAX_EXPONENT..=MAX_EXPONENT).contains(&exponent) {
        return Err("exponent out of range");
    }
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err("missing digits");
    }
    if int_part.len() + frac_part.len() > MAX_DIGITS {
        return Err("too many digits");
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err("invalid digit");
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Q::from_integer(digits.parse::<BigInt>().map_err(|_| "invalid digits")?);
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u8);
    if scale > 0 {
        value *= Q::from_integer(Pow::pow(&ten, scale as u64));
    } else if scale < 0 {
        value /= Q::from_integer(Pow::pow(&ten, (-scale) as u64));
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Integer part (floor) of a non-negative rational.
pub fn floor_u64(x: &Q) -> Option<u64> {
    if x.is_negative() {
        return None;
    }
    x.floor().to_integer().to_u64()
}

pub fn is_positive(x: &Q) -> bool {
    x.is_positive()
}

pub fn one() -> Q {
    Q::one()
}

pub fn zero() -> Q {
    Q::zero()
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_q {
    use super::Q;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(value: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_string())
    }
}
