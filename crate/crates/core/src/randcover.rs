//! Random covering of the circle: seeded Monte Carlo coverage of random
//! arcs and the analytic criterion sums that decide covering almost surely.
//!
//! Coverage of a single trial is exact: centers are rationals with
//! denominator 2^64, arcs are exact, and "covered" means the union has
//! measure exactly 1. That event coincides with total coverage except on
//! the null set of arc endpoints, which cannot affect the almost-sure
//! dichotomy; the docs flag the distinction between covering up to a null
//! set and covering completely.
//!
//! Reproducibility: trial t draws its stream from a ChaCha12 generator
//! keyed by `split_seed(master, t)` (SplitMix64), so serial and parallel
//! runs agree bit for bit and the center stream is a prefix-stable
//! function of the trial seed.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::arcs::{Arc, ArcSet, CirclePoint};
use crate::error::Error;
use crate::hp::{self, Fixed};
use crate::rat::{format_ratio, from_u64_over_2_64, parse_ratio, Rat};
use crate::sampling::split_seed;
use crate::Result;

/// Arc-length schedules for random covering.
#[derive(Clone, PartialEq, Debug)]
pub enum LengthFamily {
    /// c / n, clamped to length 1 while c >= n.
    COverN { c: Rat },
    /// ln(n+1) / n.
    LogNOverN,
    /// Explicit finite table.
    Table(Vec<Rat>),
}

impl LengthFamily {
    /// Length of the n-th arc, in (0, 1].
    pub fn eval(&self, n: u64) -> Result<Rat> {
        if n == 0 {
            return Err(Error::InvalidInput("lengths are indexed from n = 1".into()));
        }
        let raw = match self {
            LengthFamily::COverN { c } => c / Rat::from_integer(BigInt::from(n)),
            LengthFamily::LogNOverN => crate::rates::RateSeq::LogNOverN.eval(n)?,
            LengthFamily::Table(values) => {
                values
                    .get((n - 1) as usize)
                    .cloned()
                    .ok_or(Error::Horizon {
                        defined: values.len() as u64,
                        requested: n,
                    })?
            }
        };
        if !raw.is_positive() {
            return Err(Error::InvalidInput(format!(
                "arc length at n = {n} is not positive"
            )));
        }
        Ok(raw.min(Rat::one()))
    }
}

/// One trial: draws N uniform centers and reports whether the N arcs
/// cover the circle exactly (union measure 1).
///
/// Coverage only needs a gap check, so this skips the canonical arc-set
/// construction: it sorts unrolled segments by a monotone f64 key (exact
/// comparison breaks ties) and sweeps for an uncovered gap.
pub fn sample_cover(seed: u64, lengths: &LengthFamily, n: u64) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one arc".into()));
    }
    let mut rng = trial_rng(seed);
    let two = Rat::from_integer(BigInt::from(2));
    let one = Rat::one();
    let mut segments: Vec<(Rat, Rat)> = Vec::with_capacity(n as usize + 4);
    for i in 1..=n {
        let center = from_u64_over_2_64(rng.next_u64());
        let len = lengths.eval(i)?;
        if len.is_one() {
            return Ok(true);
        }
        let lo_raw = &center - &len / &two;
        let hi_raw = &lo_raw + &len;
        if lo_raw.is_negative() {
            segments.push((&lo_raw + &one, one.clone()));
            segments.push((Rat::zero(), hi_raw));
        } else if hi_raw > one {
            segments.push((lo_raw, one.clone()));
            segments.push((Rat::zero(), &hi_raw - &one));
        } else {
            segments.push((lo_raw, hi_raw));
        }
    }
    // f64 rounding is monotone, so the key ordering refines to exact order
    let mut keyed: Vec<(f64, Rat, Rat)> = segments
        .into_iter()
        .map(|(lo, hi)| (crate::rat::to_f64(&lo), lo, hi))
        .collect();
    keyed.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite keys")
            .then_with(|| a.1.cmp(&b.1))
    });
    let mut reach = Rat::zero();
    for (_, lo, hi) in keyed {
        if lo > reach {
            return Ok(false); // gap before this segment
        }
        if hi > reach {
            reach = hi;
        }
    }
    Ok(reach.is_one())
}

/// The union of the trial's arcs, exposed for monotonicity checks.
pub fn sample_union(seed: u64, lengths: &LengthFamily, n: u64) -> Result<(ArcSet, Rat)> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one arc".into()));
    }
    let mut rng = trial_rng(seed);
    let mut arcs = Vec::with_capacity(n as usize);
    for i in 1..=n {
        let center = CirclePoint::new(from_u64_over_2_64(rng.next_u64()));
        let len = lengths.eval(i)?;
        let half = &len / Rat::from_integer(BigInt::from(2));
        let start = center.add(&-half);
        arcs.push(Arc::new(start, len).expect("length in (0,1]"));
    }
    let union = ArcSet::normalize(arcs);
    let measure = union.measure();
    Ok((union, measure))
}

fn trial_rng(seed: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&split_seed(seed, i as u64).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Monte Carlo coverage estimate with a Wilson 95% interval.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub trials: u64,
    pub covered_count: u64,
    pub estimate: String,
    pub estimate_decimal: f64,
    pub wilson_95: (f64, f64),
    pub seed: u64,
    pub horizon: u64,
}

impl CoverageEstimate {
    pub fn estimate_rational(&self) -> Rat {
        parse_ratio(&self.estimate).expect("estimate is canonical")
    }
}

/// Runs `trials` independent coverage trials; trial t uses the child seed
/// `split_seed(seed, t)`.
pub fn coverage_probability(
    seed: u64,
    lengths: &LengthFamily,
    n: u64,
    trials: u64,
) -> Result<CoverageEstimate> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let mut covered = 0u64;
    for t in 0..trials {
        if sample_cover(split_seed(seed, t), lengths, n)? {
            covered += 1;
        }
    }
    let estimate = Rat::new(BigInt::from(covered), BigInt::from(trials));
    Ok(CoverageEstimate {
        trials,
        covered_count: covered,
        estimate: format_ratio(&estimate),
        estimate_decimal: covered as f64 / trials as f64,
        wilson_95: wilson_interval(covered, trials),
        seed,
        horizon: n,
    })
}

/// Wilson score interval at 95% confidence; always contains the estimate.
fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = 1.959963984540054_f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // clamp against float rounding so the interval always contains p
    let lo = ((center - half) / denom).max(0.0).min(p);
    let hi = ((center + half) / denom).min(1.0).max(p);
    (lo, hi)
}

/// Partial sums `sum_{k<=n} exp(l_1 + ... + l_k) / k^2` for n = 1..=N, in
/// fixed point with at least 30 significant digits (see [`hp`]).
pub fn shepp_partial_sums(lengths: &LengthFamily, n: u64) -> Result<Vec<Fixed>> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one term".into()));
    }
    let mut acc_len = Rat::zero();
    let mut acc = Fixed::zero();
    let mut out = Vec::with_capacity(n as usize);
    for k in 1..=n {
        acc_len += lengths.eval(k)?;
        let term = hp::exp_rat(&acc_len).div_int(k * k);
        acc = acc.add(&term);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Symbolic classification of the covering criterion
/// `sum exp(l_1+...+l_n)/n^2`.
///
/// For lengths c/n the summand behaves like n^(c-2), so the sum diverges
/// exactly when c >= 1; ln(n+1)/n makes the summand order 1/2n (the
/// partial length sums telescope past ln n), which diverges; tables decide
/// nothing about their infinite extension.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheppClass {
    Diverges,
    Converges,
    Unknown,
}

pub fn classify_lengths(lengths: &LengthFamily) -> SheppClass {
    match lengths {
        LengthFamily::COverN { c } => {
            if *c >= Rat::one() {
                SheppClass::Diverges
            } else {
                SheppClass::Converges
            }
        }
        LengthFamily::LogNOverN => SheppClass::Diverges,
        LengthFamily::Table(_) => SheppClass::Unknown,
    }
}

// --- serde ---------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LengthRepr {
    COverN { c: String },
    LogNOverN {},
    Table { values: Vec<String> },
}

impl Serialize for LengthFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            LengthFamily::COverN { c } => LengthRepr::COverN { c: format_ratio(c) },
            LengthFamily::LogNOverN => LengthRepr::LogNOverN {},
            LengthFamily::Table(values) => LengthRepr::Table {
                values: values.iter().map(format_ratio).collect(),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LengthFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match LengthRepr::deserialize(d)? {
            LengthRepr::COverN { c } => LengthFamily::COverN {
                c: parse_ratio(&c).map_err(D::Error::custom)?,
            },
            LengthRepr::LogNOverN {} => LengthFamily::LogNOverN,
            LengthRepr::Table { values } => LengthFamily::Table(
                values
                    .iter()
                    .map(|s| parse_ratio(s).map_err(D::Error::custom))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn trivial_cover_cases() {
        // a single full-circle arc always covers
        let full = LengthFamily::Table(vec![rat(1, 1)]);
        assert!(sample_cover(1, &full, 1).unwrap());
        // a single quarter arc never covers
        let quarter = LengthFamily::Table(vec![rat(1, 4)]);
        assert!(!sample_cover(1, &quarter, 1).unwrap());
    }

    #[test]
    fn reproducible_trials() {
        let lengths = LengthFamily::COverN { c: rat(1, 1) };
        let a = sample_cover(42, &lengths, 500).unwrap();
        let b = sample_cover(42, &lengths, 500).unwrap();
        assert_eq!(a, b);
        let est1 = coverage_probability(7, &lengths, 200, 20).unwrap();
        let est2 = coverage_probability(7, &lengths, 200, 20).unwrap();
        assert_eq!(est1.covered_count, est2.covered_count);
        assert_eq!(est1.wilson_95, est2.wilson_95);
    }

    #[test]
    fn monotone_in_horizon_per_trial() {
        // the arc set only grows with N under a fixed seed
        let lengths = LengthFamily::COverN { c: rat(3, 2) };
        for seed in 0..10u64 {
            let (_, m1) = sample_union(seed, &lengths, 50).unwrap();
            let (_, m2) = sample_union(seed, &lengths, 100).unwrap();
            assert!(m2 >= m1, "seed {seed}");
            if sample_cover(seed, &lengths, 50).unwrap() {
                assert!(sample_cover(seed, &lengths, 100).unwrap());
            }
        }
    }

    #[test]
    fn monotone_in_c_with_coupled_seeds() {
        let small = LengthFamily::COverN { c: rat(1, 2) };
        let large = LengthFamily::COverN { c: rat(2, 1) };
        for seed in 0..10u64 {
            if sample_cover(seed, &small, 200).unwrap() {
                assert!(sample_cover(seed, &large, 200).unwrap());
            }
        }
    }

    #[test]
    fn estimate_degenerate_cases() {
        let full = LengthFamily::Table(vec![rat(1, 1)]);
        let est = coverage_probability(3, &full, 1, 50).unwrap();
        assert_eq!(est.covered_count, 50);
        assert_eq!(est.estimate_rational(), rat(1, 1));
        assert!(est.wilson_95.0 <= 1.0 && est.wilson_95.1 >= 0.99);

        let quarter = LengthFamily::Table(vec![rat(1, 4)]);
        let est0 = coverage_probability(3, &quarter, 1, 50).unwrap();
        assert_eq!(est0.covered_count, 0);
        assert!(est0.wilson_95.0 == 0.0);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, t) in [(0u64, 10u64), (5, 10), (10, 10), (399, 400), (1, 400)] {
            let (lo, hi) = wilson_interval(s, t);
            let p = s as f64 / t as f64;
            assert!(lo <= p && p <= hi, "{s}/{t}");
        }
    }

    #[test]
    fn shepp_sum_example() {
        // lengths (1, 1/2): e + e^1.5 / 4 = 3.83870409...
        let lengths = LengthFamily::Table(vec![rat(1, 1), rat(1, 2)]);
        let sums = shepp_partial_sums(&lengths, 2).unwrap();
        let s1 = sums[0].to_decimal(30);
        assert!(s1.starts_with("2.71828182845904523536"), "{s1}");
        let s2 = sums[1].to_decimal(30);
        assert!(s2.starts_with("3.8387"), "{s2}");
        let want = 1f64.exp() + 1.5f64.exp() / 4.0;
        assert!((sums[1].to_f64() - want).abs() < 1e-12);
        // monotone increasing
        assert!(sums[1] > sums[0]);
    }

    #[test]
    fn shepp_sums_monotone_and_bounded_for_zero_limit() {
        // lengths pinned tiny: partial sums close to sum 1/n^2 < pi^2/6
        let tiny = LengthFamily::Table(vec![rat(1, 1_000_000_000); 40]);
        let sums = shepp_partial_sums(&tiny, 40).unwrap();
        for w in sums.windows(2) {
            assert!(w[1] > w[0]);
        }
        let last = sums.last().unwrap().to_f64();
        assert!(last < std::f64::consts::PI.powi(2) / 6.0 + 1e-6);
    }

    #[test]
    fn classification_table() {
        assert_eq!(
            classify_lengths(&LengthFamily::COverN { c: rat(1, 1) }),
            SheppClass::Diverges
        );
        assert_eq!(
            classify_lengths(&LengthFamily::COverN { c: rat(1, 2) }),
            SheppClass::Converges
        );
        assert_eq!(classify_lengths(&LengthFamily::LogNOverN), SheppClass::Diverges);
        assert_eq!(
            classify_lengths(&LengthFamily::Table(vec![rat(1, 4)])),
            SheppClass::Unknown
        );
    }

    #[test]
    fn serde_round_trip() {
        for f in [
            LengthFamily::COverN { c: rat(2, 1) },
            LengthFamily::LogNOverN,
            LengthFamily::Table(vec![rat(1, 4), rat(1, 8)]),
        ] {
            let json = serde_json::to_string(&f).unwrap();
            let back: LengthFamily = serde_json::from_str(&json).unwrap();
            assert_eq!(f, back);
        }
    }
}
