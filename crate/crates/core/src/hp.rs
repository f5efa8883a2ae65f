//! High-precision fixed-point arithmetic for the few transcendental
//! quantities in the crate: log-family rates and the exponential sums of
//! the random-covering criterion.
//!
//! A `Fixed` is an integer count of 2^-192 units. Series are truncated when
//! terms drop below one unit and every operation rounds toward zero, so
//! results carry absolute error well under 2^-160 — far finer than the
//! 2^-80 dyadic grid the rate families round to and the 30 significant
//! digits the criterion sums report.
//!
//! Certified inequalities never use this module's truncated values: the
//! rational bounds on e^j come from the factorial series with an explicit
//! remainder term and stay exact rationals.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::rat::Rat;

/// Fractional bits carried by every fixed-point value.
pub const PREC_BITS: u32 = 192;

/// Fixed-point value `n / 2^PREC_BITS`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Fixed(BigInt);

impl Fixed {
    pub fn zero() -> Self {
        Fixed(BigInt::zero())
    }

    pub fn one() -> Self {
        Fixed(BigInt::one() << PREC_BITS)
    }

    /// Floor of `r * 2^PREC_BITS`; exact for dyadic inputs at or above
    /// 2^-PREC_BITS resolution.
    pub fn from_rat(r: &Rat) -> Self {
        let scaled = (r.numer() << PREC_BITS).div_floor(r.denom());
        Fixed(scaled)
    }

    pub fn from_u64(n: u64) -> Self {
        Fixed(BigInt::from(n) << PREC_BITS)
    }

    pub fn to_rat(&self) -> Rat {
        Rat::new(self.0.clone(), BigInt::one() << PREC_BITS)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, other: &Fixed) -> Fixed {
        Fixed(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Fixed) -> Fixed {
        Fixed(&self.0 - &other.0)
    }

    /// Product rounded toward zero.
    pub fn mul(&self, other: &Fixed) -> Fixed {
        let wide = &self.0 * &other.0;
        Fixed(shift_toward_zero(wide, PREC_BITS))
    }

    /// Quotient by a positive integer, rounded toward zero.
    pub fn div_int(&self, d: u64) -> Fixed {
        let d = BigInt::from(d);
        let (q, _) = self.0.div_rem(&d);
        Fixed(q)
    }

    /// Binary exponentiation, each step rounded toward zero.
    pub fn pow(&self, mut e: u64) -> Fixed {
        let mut base = self.clone();
        let mut acc = Fixed::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Plain decimal rendering with at least `sig` significant digits.
    pub fn to_decimal(&self, sig: u32) -> String {
        if self.0.is_zero() {
            return "0".to_string();
        }
        let negative = self.0.is_negative();
        let abs = self.0.abs();
        let int_part = &abs >> PREC_BITS;
        let int_digits = if int_part.is_zero() {
            0
        } else {
            int_part.to_string().len() as u32
        };
        let frac_digits = sig.saturating_sub(int_digits).max(1);
        let scale = BigInt::from(10u32).pow(frac_digits);
        // round(|v| * 10^frac)
        let scaled = (&abs * &scale + (BigInt::one() << (PREC_BITS - 1))) >> PREC_BITS;
        let digits = scaled.to_string();
        let frac_digits = frac_digits as usize;
        let sign = if negative { "-" } else { "" };
        if digits.len() <= frac_digits {
            format!("{sign}0.{digits:0>frac_digits$}")
        } else {
            let (i, f) = digits.split_at(digits.len() - frac_digits);
            format!("{sign}{i}.{f}")
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0
            .to_f64()
            .map(|v| v / 2f64.powi(PREC_BITS as i32))
            .unwrap_or(f64::INFINITY)
    }
}

fn shift_toward_zero(v: BigInt, bits: u32) -> BigInt {
    if v.is_negative() {
        -((-v) >> bits)
    } else {
        v >> bits
    }
}

/// ln 2 = 2 artanh(1/3), cached.
pub fn ln2() -> &'static Fixed {
    static LN2: OnceLock<Fixed> = OnceLock::new();
    LN2.get_or_init(|| atanh_series(&Rat::new(BigInt::one(), BigInt::from(3))))
}

/// `2 * sum t^(2k+1) / (2k+1)` for rational `t` in [0, 1/2); converges
/// geometrically with ratio t^2.
fn atanh_series(t: &Rat) -> Fixed {
    let t_fixed = Fixed::from_rat(t);
    let t2 = t_fixed.mul(&t_fixed);
    let mut power = t_fixed.clone();
    let mut acc = Fixed::zero();
    let mut k = 0u64;
    loop {
        let term = power.div_int(2 * k + 1);
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
        power = power.mul(&t2);
        k += 1;
    }
    acc.add(&acc.clone())
}

/// Natural log of a positive rational.
///
/// Reduces to `ln x = e * ln 2 + 2 * artanh((z-1)/(z+1))` with `z = x / 2^e`
/// in [1, 2).
pub fn ln_rat(x: &Rat) -> Fixed {
    assert!(x.is_positive(), "ln needs a positive argument");
    let two = Rat::from_integer(BigInt::from(2));
    let mut e: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let mut z = if e >= 0 {
        x / Rat::from_integer(BigInt::one() << e as usize)
    } else {
        x * Rat::from_integer(BigInt::one() << (-e) as usize)
    };
    while z >= two {
        z = z / &two;
        e += 1;
    }
    while z < Rat::one() {
        z = z * &two;
        e -= 1;
    }
    let t = (&z - Rat::one()) / (&z + Rat::one());
    let frac = atanh_series(&t);
    Fixed(&ln2().0 * BigInt::from(e)).add(&frac)
}

/// e^x for rational x >= 0: integer part by powering e, fractional part by
/// the Taylor series.
pub fn exp_rat(x: &Rat) -> Fixed {
    assert!(!x.is_negative(), "exp_rat takes nonnegative arguments");
    let n = x.to_integer();
    let f = x - Rat::from_integer(n.clone());
    let frac = exp_series(&f);
    let n = n.to_u64().expect("exponent magnitude fits u64");
    if n == 0 {
        frac
    } else {
        e_fixed().pow(n).mul(&frac)
    }
}

fn e_fixed() -> &'static Fixed {
    static E: OnceLock<Fixed> = OnceLock::new();
    E.get_or_init(|| exp_series(&Rat::one()))
}

/// Taylor series for e^f with rational f in [0, 1].
fn exp_series(f: &Rat) -> Fixed {
    let f_fixed = Fixed::from_rat(f);
    let mut term = Fixed::one();
    let mut acc = Fixed::one();
    let mut k = 1u64;
    loop {
        term = term.mul(&f_fixed).div_int(k);
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
        k += 1;
    }
    acc
}

/// Exact rational bounds `(lower, upper)` with `lower <= e <= upper`,
/// from 45 terms of the factorial series plus its remainder bound
/// (the gap is under 2*10^-56).
pub fn e_bounds() -> (Rat, Rat) {
    static BOUNDS: OnceLock<(Rat, Rat)> = OnceLock::new();
    BOUNDS
        .get_or_init(|| {
            let terms = 45u64;
            let mut factorial = BigInt::one();
            let mut lower = Rat::zero();
            for k in 0..=terms {
                if k > 0 {
                    factorial *= BigInt::from(k);
                }
                lower += Rat::new(BigInt::one(), factorial.clone());
            }
            let remainder = Rat::new(BigInt::from(2), &factorial * BigInt::from(terms + 1));
            let upper = &lower + remainder;
            (lower, upper)
        })
        .clone()
}

/// A rational upper bound on e^-j; `x <= exp_neg_upper(j)` certifies
/// `x <= e^-j` up to the bound's own error, below 10^-50 for j <= 40.
pub fn exp_neg_upper(j: u32) -> Rat {
    let (lower_e, _) = e_bounds();
    Rat::one() / pow_rat(&lower_e, j)
}

/// Exact rational lower bound on e^-j.
pub fn exp_neg_lower(j: u32) -> Rat {
    let (_, upper_e) = e_bounds();
    Rat::one() / pow_rat(&upper_e, j)
}

pub fn pow_rat(r: &Rat, mut e: u32) -> Rat {
    let mut base = r.clone();
    let mut acc = Rat::one();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}
