//! Rate schedules: the sequences of radii/measures that targets shrink by.
//!
//! All values are positive rationals. The two log families evaluate
//! `ln(n+1)` (shifted by one so the first term is finite and positive)
//! through the fixed-point layer and round the result down to the 2^-80
//! dyadic grid; the rounding is orders of magnitude below the gaps between
//! consecutive values at any feasible horizon, so monotonicity survives.
//! `validate` checks positivity and monotonicity exactly over a requested
//! horizon rather than trusting the analytic argument.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hp;
use crate::rat::{dyadic_floor_unit, format_ratio, parse_ratio, pow2, Rat};
use crate::Result;

/// Grid for rounding transcendental rate values: 80 fractional bits.
const LOG_GRID_BITS: u32 = 80;

#[derive(Clone, PartialEq, Debug)]
pub enum RateSeq {
    /// c / n
    COverN { c: Rat },
    /// c / (n * ln(n+1))
    COverNLogN { c: Rat },
    /// c / n^alpha
    COverNPow { c: Rat, alpha: Rat },
    /// ln(n+1) / n
    LogNOverN,
    /// Explicit finite table, 1-indexed.
    Table(Vec<Rat>),
    /// The inner rate floored to the largest power of two below it, so the
    /// value at n is 2^-m with 2^-m in (eps_n/2, eps_n].
    DyadicFloor(Box<RateSeq>),
}

impl RateSeq {
    pub fn c_over_n(c: Rat) -> Self {
        RateSeq::COverN { c }
    }

    pub fn table(values: Vec<Rat>) -> Self {
        RateSeq::Table(values)
    }

    pub fn dyadic_floor(inner: RateSeq) -> Self {
        RateSeq::DyadicFloor(Box::new(inner))
    }

    /// The value at time n >= 1. Tables error beyond their length.
    pub fn eval(&self, n: u64) -> Result<Rat> {
        if n == 0 {
            return Err(Error::InvalidInput("rates are indexed from n = 1".into()));
        }
        match self {
            RateSeq::COverN { c } => Ok(c / Rat::from_integer(BigInt::from(n))),
            RateSeq::COverNLogN { c } => {
                let ln = ln_n_plus_1_grid(n);
                Ok(c / (Rat::from_integer(BigInt::from(n)) * ln))
            }
            RateSeq::COverNPow { c, alpha } => {
                if n == 1 {
                    return Ok(c.clone());
                }
                // n^alpha = exp(alpha * ln n), then rounded down
                let ln_n = hp::ln_rat(&Rat::from_integer(BigInt::from(n))).to_rat();
                let power = hp::exp_rat(&(ln_n * alpha)).to_rat();
                let value = c / power;
                Ok(round_down_to_grid(&value))
            }
            RateSeq::LogNOverN => {
                let ln = ln_n_plus_1_grid(n);
                Ok(ln / Rat::from_integer(BigInt::from(n)))
            }
            RateSeq::Table(values) => values
                .get((n - 1) as usize)
                .cloned()
                .ok_or(Error::Horizon {
                    defined: values.len() as u64,
                    requested: n,
                }),
            RateSeq::DyadicFloor(inner) => {
                let eps = inner.eval(n)?;
                if !eps.is_positive() {
                    return Err(Error::InvalidInput(format!(
                        "rate at n = {n} is not positive: {}",
                        format_ratio(&eps)
                    )));
                }
                Ok(dyadic_floor_unit(&eps).0)
            }
        }
    }

    /// Checks eps_n > 0 and eps_n nonincreasing exactly for n = 1..=horizon.
    pub fn validate(&self, horizon: u64) -> Result<()> {
        let mut prev: Option<Rat> = None;
        for n in 1..=horizon {
            let eps = self.eval(n)?;
            if !eps.is_positive() {
                return Err(Error::InvalidInput(format!(
                    "rate at n = {n} is not positive"
                )));
            }
            if let Some(p) = &prev {
                if &eps > p {
                    return Err(Error::InvalidInput(format!(
                        "rates increase at n = {n}: {} > {}",
                        format_ratio(&eps),
                        format_ratio(p)
                    )));
                }
            }
            prev = Some(eps);
        }
        Ok(())
    }

    /// Exact partial sum `sum_{n<=N} eps_n`.
    pub fn partial_sum(&self, horizon: u64) -> Result<Rat> {
        let mut acc = Rat::zero();
        for n in 1..=horizon {
            acc += self.eval(n)?;
        }
        Ok(acc)
    }

    /// Symbolic divergence of `sum eps_n`: Some(true)/Some(false) for the
    /// analytic families, None for tables.
    pub fn sum_diverges(&self) -> Option<bool> {
        match self {
            RateSeq::COverN { .. } => Some(true),
            RateSeq::COverNLogN { .. } => Some(true),
            RateSeq::COverNPow { alpha, .. } => Some(*alpha <= Rat::one()),
            RateSeq::LogNOverN => Some(true),
            RateSeq::Table(_) => None,
            RateSeq::DyadicFloor(inner) => inner.sum_diverges(),
        }
    }

    /// Length of a table, if this is (or floors) one.
    pub fn table_len(&self) -> Option<u64> {
        match self {
            RateSeq::Table(v) => Some(v.len() as u64),
            RateSeq::DyadicFloor(inner) => inner.table_len(),
            _ => None,
        }
    }
}

/// ln(n+1) rounded down to the 2^-80 grid; positive for every n >= 1.
fn ln_n_plus_1_grid(n: u64) -> Rat {
    let ln = hp::ln_rat(&Rat::from_integer(BigInt::from(n + 1))).to_rat();
    round_down_to_grid(&ln)
}

fn round_down_to_grid(v: &Rat) -> Rat {
    let scaled = (v * pow2(LOG_GRID_BITS as i64)).floor();
    let floored = scaled * pow2(-(LOG_GRID_BITS as i64));
    if floored.is_positive() {
        floored
    } else {
        v.clone() // below the grid: keep the exact rational rather than 0
    }
}

// --- serde: tagged JSON mirroring the map-spec style --------------------

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RateRepr {
    COverN { c: String },
    COverNLogN { c: String },
    COverNPow { c: String, alpha: String },
    LogNOverN {},
    Table { values: Vec<String> },
    DyadicFloor { inner: Box<RateRepr> },
}

fn to_repr(r: &RateSeq) -> RateRepr {
    match r {
        RateSeq::COverN { c } => RateRepr::COverN { c: format_ratio(c) },
        RateSeq::COverNLogN { c } => RateRepr::COverNLogN { c: format_ratio(c) },
        RateSeq::COverNPow { c, alpha } => RateRepr::COverNPow {
            c: format_ratio(c),
            alpha: format_ratio(alpha),
        },
        RateSeq::LogNOverN => RateRepr::LogNOverN {},
        RateSeq::Table(values) => RateRepr::Table {
            values: values.iter().map(format_ratio).collect(),
        },
        RateSeq::DyadicFloor(inner) => RateRepr::DyadicFloor {
            inner: Box::new(to_repr(inner)),
        },
    }
}

fn from_repr(r: RateRepr) -> Result<RateSeq> {
    Ok(match r {
        RateRepr::COverN { c } => RateSeq::COverN { c: parse_positive(&c)? },
        RateRepr::COverNLogN { c } => RateSeq::COverNLogN { c: parse_positive(&c)? },
        RateRepr::COverNPow { c, alpha } => RateSeq::COverNPow {
            c: parse_positive(&c)?,
            alpha: parse_positive(&alpha)?,
        },
        RateRepr::LogNOverN {} => RateSeq::LogNOverN,
        RateRepr::Table { values } => RateSeq::Table(
            values
                .iter()
                .map(|s| parse_ratio(s))
                .collect::<Result<Vec<_>>>()?,
        ),
        RateRepr::DyadicFloor { inner } => RateSeq::DyadicFloor(Box::new(from_repr(*inner)?)),
    })
}

fn parse_positive(s: &str) -> Result<Rat> {
    let v = parse_ratio(s)?;
    if !v.is_positive() {
        return Err(Error::InvalidInput(format!(
            "rate parameter must be positive, got {s}"
        )));
    }
    Ok(v)
}

impl Serialize for RateSeq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_repr(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RateSeq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = RateRepr::deserialize(d)?;
        from_repr(repr).map_err(serde::de::Error::custom)
    }
}
