//! Target sequences and hit statistics along orbits.
//!
//! A target assigns a subset of the circle to each time n; a hit at time n
//! means `tau^n(x)` lands in the n-th set. Geometric targets are closed
//! balls, tested by exact circle distance (`d <= eps`), so the two boundary
//! points count as hits even though arc sets are half-open; the two views
//! differ only on a null set, and the distance test keeps hit records
//! deterministic.

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::arcs::{Arc, ArcSet, CirclePoint};
use crate::error::Error;
use crate::maps::MapSpec;
use crate::rat::Rat;
use crate::rates::RateSeq;
use crate::Result;

/// A rule assigning a target set to each time n >= 1.
#[derive(Clone, Debug)]
pub enum TargetSeq {
    /// Closed balls `B_eps_n(center)` around a fixed center.
    GeometricBalls { center: CirclePoint, radii: RateSeq },
    /// Closed balls around the orbit's own starting point.
    SelfBalls { radii: RateSeq },
    /// Explicit finite table of sets, 1-indexed; errors past its end.
    AbstractSets { table: Vec<ArcSet> },
    /// The same set at every time.
    FixedSet(ArcSet),
}

impl TargetSeq {
    /// Whether `tau^n(x) = point` hits the n-th target.
    fn hit_at(&self, n: u64, point: &CirclePoint, orbit_start: &CirclePoint) -> Result<bool> {
        match self {
            TargetSeq::GeometricBalls { center, radii } => {
                let eps = radii.eval(n)?;
                Ok(point.dist(center) <= eps)
            }
            TargetSeq::SelfBalls { radii } => {
                let eps = radii.eval(n)?;
                Ok(point.dist(orbit_start) <= eps)
            }
            TargetSeq::AbstractSets { table } => {
                let set = table.get((n - 1) as usize).ok_or(Error::Horizon {
                    defined: table.len() as u64,
                    requested: n,
                })?;
                Ok(set.contains(point))
            }
            TargetSeq::FixedSet(set) => Ok(set.contains(point)),
        }
    }

    /// Validates that the sequence is defined through the horizon.
    pub fn check_horizon(&self, horizon: u64) -> Result<()> {
        match self {
            TargetSeq::GeometricBalls { radii, .. } | TargetSeq::SelfBalls { radii } => {
                if let Some(len) = radii.table_len() {
                    if len < horizon {
                        return Err(Error::Horizon {
                            defined: len,
                            requested: horizon,
                        });
                    }
                }
                Ok(())
            }
            TargetSeq::AbstractSets { table } => {
                if (table.len() as u64) < horizon {
                    return Err(Error::Horizon {
                        defined: table.len() as u64,
                        requested: horizon,
                    });
                }
                Ok(())
            }
            TargetSeq::FixedSet(_) => Ok(()),
        }
    }
}

/// The hit times of one orbit against one target sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitRecord {
    pub times: Vec<u64>,
    pub horizon: u64,
    pub first_hit: Option<u64>,
    pub count: u64,
}

impl HitRecord {
    fn from_times(times: Vec<u64>, horizon: u64) -> Self {
        HitRecord {
            first_hit: times.first().copied(),
            count: times.len() as u64,
            times,
            horizon,
        }
    }

    /// Hits with time in `[n0, n1]`.
    pub fn count_in(&self, n0: u64, n1: u64) -> u64 {
        self.times.iter().filter(|&&t| t >= n0 && t <= n1).count() as u64
    }
}

/// Exact hit record of `tau^n(x) in B_n` for n = 1..=N.
pub fn hits(map: &MapSpec, x: &CirclePoint, targets: &TargetSeq, horizon: u64) -> Result<HitRecord> {
    targets.check_horizon(horizon)?;
    let mut times = Vec::new();
    for (i, point) in map.orbit(x, horizon).enumerate() {
        let n = i as u64 + 1;
        if targets.hit_at(n, &point, x)? {
            times.push(n);
        }
    }
    Ok(HitRecord::from_times(times, horizon))
}

/// Minimum of `n * d(tau^n(x), y)` over n = 1..=N, with its argmin.
/// Exact rational arithmetic; nonincreasing as N grows.
pub fn scaled_distance_min(
    map: &MapSpec,
    x: &CirclePoint,
    y: &CirclePoint,
    horizon: u64,
) -> Result<(Rat, u64)> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let mut best: Option<(Rat, u64)> = None;
    for (i, point) in map.orbit(x, horizon).enumerate() {
        let n = i as u64 + 1;
        let value = point.dist(y) * Rat::from_integer(BigInt::from(n));
        match &best {
            Some((b, _)) if *b <= value => {}
            _ => best = Some((value, n)),
        }
    }
    Ok(best.expect("horizon >= 1"))
}

/// The full scaled-distance trace `n * d(tau^n(x), y)` for reports.
pub fn scaled_distance_trace(
    map: &MapSpec,
    x: &CirclePoint,
    y: &CirclePoint,
    horizon: u64,
) -> Vec<Rat> {
    map.orbit(x, horizon)
        .enumerate()
        .map(|(i, point)| point.dist(y) * Rat::from_integer(BigInt::from(i as u64 + 1)))
        .collect()
}

/// Closed ball of radius eps around c, realized as the half-open arc
/// `[c - eps, c + eps)` (full circle once 2*eps >= 1).
pub fn ball_arcset(center: &CirclePoint, eps: &Rat) -> ArcSet {
    if !eps.is_positive() {
        return ArcSet::empty();
    }
    let two_eps = eps + eps;
    if two_eps >= Rat::one() {
        return ArcSet::full();
    }
    let start = center.add(&-eps.clone());
    ArcSet::from_arc(Arc::new(start, two_eps).expect("0 < 2eps < 1"))
}

/// Exact union of orbit balls `U_{n=N..=M} B_{eps_n}(tau^n(x))` with its
/// measure. Monotone nondecreasing in M.
pub fn tail_ball_union(
    map: &MapSpec,
    x: &CirclePoint,
    radii: &RateSeq,
    n_start: u64,
    m_end: u64,
) -> Result<(ArcSet, Rat)> {
    if n_start == 0 || n_start > m_end {
        return Err(Error::InvalidInput(format!(
            "need 1 <= N <= M, got N = {n_start}, M = {m_end}"
        )));
    }
    let mut arcs = Vec::new();
    for (i, point) in map.orbit(x, m_end).enumerate() {
        let n = i as u64 + 1;
        if n < n_start {
            continue;
        }
        let eps = radii.eval(n)?;
        for arc in ball_arcset(&point, &eps).arcs() {
            arcs.push(arc.clone());
        }
    }
    let union = ArcSet::normalize(arcs);
    let measure = union.measure();
    Ok((union, measure))
}

/// Exact union of preimages `U_{n=N..=M} tau^-n(B_n)` with its measure.
/// `table` is 1-indexed (`table[0]` is B_1) and must extend through M.
///
/// Computed by the backward recursion `V_M = B_M`,
/// `V_n = B_n u tau^-1(V_{n+1})`, and a final `tau^-N`, so the map's
/// preimage operator runs M times rather than N + (N+1) + ... times.
pub fn tail_preimage_union(
    map: &MapSpec,
    table: &[ArcSet],
    n_start: u64,
    m_end: u64,
) -> Result<(ArcSet, Rat)> {
    if n_start == 0 || n_start > m_end {
        return Err(Error::InvalidInput(format!(
            "need 1 <= N <= M, got N = {n_start}, M = {m_end}"
        )));
    }
    if (table.len() as u64) < m_end {
        return Err(Error::Horizon {
            defined: table.len() as u64,
            requested: m_end,
        });
    }
    let mut v = table[(m_end - 1) as usize].clone();
    for n in (n_start..m_end).rev() {
        v = table[(n - 1) as usize].union(&map.preimage_set(&v));
    }
    let result = map.preimage_set_n(&v, n_start);
    let measure = result.measure();
    Ok((result, measure))
}

/// Fraction of sampled starting points with at least one hit time in
/// `[n0, n1]`. Exact rational `hits / samples`.
pub fn visibility_fraction(
    map: &MapSpec,
    sample: &[CirclePoint],
    targets: &TargetSeq,
    n0: u64,
    n1: u64,
) -> Result<Rat> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if n0 == 0 || n0 > n1 {
        return Err(Error::InvalidInput(format!(
            "need 1 <= N0 <= N, got N0 = {n0}, N = {n1}"
        )));
    }
    let mut visible = 0u64;
    for x in sample {
        let record = hits(map, x, targets, n1)?;
        if record.count_in(n0, n1) > 0 {
            visible += 1;
        }
    }
    Ok(Rat::new(BigInt::from(visible), BigInt::from(sample.len())))
}

/// Exact expected hit count `sum_{n<=N} eps_n` for independent targets.
pub fn expected_hits(rates: &RateSeq, horizon: u64) -> Result<Rat> {
    rates.partial_sum(horizon)
}
