//! Arbitrary-precision rational helpers: parsing/printing `"p/q"` strings,
//! mod-1 reduction, powers of two, and decimal rendering for reports.

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

pub type Rat = num_rational::BigRational;

/// Shorthand for small rationals in tests and literals.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// 2^k for any integer k (negative gives dyadic fractions).
pub fn pow2(k: i64) -> Rat {
    let one = BigInt::one();
    if k >= 0 {
        Rat::from_integer(one << k as usize)
    } else {
        Rat::new(one.clone(), one << (-k) as usize)
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac_mod_1(r: &Rat) -> Rat {
    let f = r.fract();
    if f.is_negative() {
        f + Rat::one()
    } else {
        f
    }
}

/// Smallest m >= 0 with 2^-m <= r. Requires r > 0; r >= 1 gives 0.
///
/// This is the dyadic-floor exponent: 2^-m is the largest power of two
/// that is <= min(r, 1), so 2^-m lies in (r/2, r] whenever r <= 1.
pub fn ceil_log2_inv(r: &Rat) -> u32 {
    assert!(r.is_positive(), "ceil_log2_inv needs a positive rational");
    if *r >= Rat::one() {
        return 0;
    }
    // smallest m with numer * 2^m >= denom
    let mut shifted = r.numer().clone();
    let target = r.denom();
    let mut m = 0u32;
    // jump close via bit lengths, then fix up
    let gap = target.bits() as i64 - shifted.bits() as i64;
    if gap > 1 {
        m = (gap - 1) as u32;
        shifted <<= (gap - 1) as usize;
    }
    while &shifted < target {
        shifted <<= 1;
        m += 1;
    }
    m
}

/// Largest power of two <= min(r, 1), as a rational together with its
/// exponent m (the value is 2^-m).
pub fn dyadic_floor_unit(r: &Rat) -> (Rat, u32) {
    let m = ceil_log2_inv(r);
    (pow2(-(m as i64)), m)
}

/// True when r = a / 2^b for integers a, b >= 0.
pub fn is_dyadic(r: &Rat) -> bool {
    let mut d = r.denom().clone();
    if d.is_zero() {
        return false;
    }
    while d.is_even() {
        d >>= 1;
    }
    d.is_one()
}

trait EvenOdd {
    fn is_even(&self) -> bool;
}
impl EvenOdd for BigInt {
    fn is_even(&self) -> bool {
        !self.bit(0)
    }
}

/// Parses `"p/q"` (or a bare integer `"p"`) into a rational.
pub fn parse_ratio(s: &str) -> Result<Rat, Error> {
    let s = s.trim();
    let make_err = || Error::ParseRational(s.to_string());
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| make_err())?;
    let d: BigInt = den.parse().map_err(|_| make_err())?;
    if d.is_zero() {
        return Err(make_err());
    }
    Ok(Rat::new(n, d))
}

/// Canonical `"p/q"` form, always with an explicit denominator.
pub fn format_ratio(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Fixed-point decimal rendering with `places` digits after the point,
/// rounding half away from zero. Deterministic; used for CSV columns.
pub fn decimal_string(r: &Rat, places: u32) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let abs = r.abs();
    let scale = BigInt::from(10u32).pow(places);
    // round(|r| * 10^places)
    let scaled = (abs * Rat::from_integer(scale)).round();
    let digits = scaled.to_integer().magnitude().to_string();
    let places = places as usize;
    if places == 0 {
        return format!("{sign}{digits}");
    }
    if digits.len() <= places {
        format!("{sign}0.{digits:0>places$}")
    } else {
        let (int_part, frac_part) = digits.split_at(digits.len() - places);
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Approximate f64 value, for display and statistics only.
pub fn to_f64(r: &Rat) -> f64 {
    ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// Exact rational from a 64-bit numerator over 2^64.
pub fn from_u64_over_2_64(u: u64) -> Rat {
    Rat::new(BigInt::from(u), BigInt::from(1u8) << 64)
}

pub fn big(n: u64) -> BigInt {
    BigInt::from(n)
}

pub fn sign_is_positive(b: &BigInt) -> bool {
    b.sign() == Sign::Plus
}

/// Serde adapter: rationals as `"p/q"` strings.
pub mod serde_ratio {
    use super::{format_ratio, parse_ratio, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rat>` as `["p/q", ...]`.
pub mod serde_ratio_vec {
    use super::{format_ratio, parse_ratio, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|r| format_ratio(r)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .iter()
            .map(|s| parse_ratio(s).map_err(de::Error::custom))
            .collect()
    }
}
