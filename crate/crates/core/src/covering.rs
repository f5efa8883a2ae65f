//! Covering radii: the minimal radius r_n such that closed balls of that
//! radius at the first n orbit points cover the circle.
//!
//! With finitely many points, closed balls of radius r cover exactly when
//! 2r reaches the largest circular gap, so r_n is half the maximal gap of
//! the first n points. The profile is computed incrementally: a sorted set
//! of points plus a multiset of gaps, each insertion splitting one gap in
//! O(log n).

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arcs::{circular_gaps, CirclePoint};
use crate::error::Error;
use crate::maps::MapSpec;
use crate::rat::{format_ratio, Rat};
use crate::Result;

/// Half the maximal circular gap of the distinct input points.
pub fn covering_radius(points: &[CirclePoint]) -> Result<Rat> {
    let gaps = circular_gaps(points)?;
    let max_gap = gaps.last().expect("nonempty gap list").clone();
    Ok(max_gap / Rat::from_integer(BigInt::from(2)))
}

/// The profile r_1, ..., r_N of one orbit, with the scaled values n * r_n.
#[derive(Clone, Debug)]
pub struct CoverProfile {
    /// r_n for n = 1..=N.
    pub values: Vec<Rat>,
    /// n * r_n.
    pub scaled: Vec<Rat>,
    pub sup_scaled: Rat,
    pub argmax: u64,
    /// Set when an orbit point repeated (rational-rotation stalling);
    /// the profile is then eventually constant.
    pub periodic_detected: bool,
}

impl CoverProfile {
    pub fn horizon(&self) -> u64 {
        self.values.len() as u64
    }
}

/// Incremental gap structure: sorted points and a gap multiset.
struct GapTracker {
    points: BTreeSet<Rat>,
    gaps: BTreeMap<Rat, u64>,
    repeat_seen: bool,
}

impl GapTracker {
    fn new() -> Self {
        GapTracker {
            points: BTreeSet::new(),
            gaps: BTreeMap::new(),
            repeat_seen: false,
        }
    }

    fn add_gap(&mut self, g: Rat) {
        *self.gaps.entry(g).or_insert(0) += 1;
    }

    fn remove_gap(&mut self, g: &Rat) {
        match self.gaps.get_mut(g) {
            Some(1) => {
                self.gaps.remove(g);
            }
            Some(c) => *c -= 1,
            None => unreachable!("gap bookkeeping out of sync"),
        }
    }

    fn insert(&mut self, p: CirclePoint) {
        let p = p.into_value();
        if self.points.contains(&p) {
            self.repeat_seen = true;
            return;
        }
        if self.points.is_empty() {
            self.points.insert(p);
            self.add_gap(Rat::one());
            return;
        }
        // circular neighbors
        let pred = self
            .points
            .range(..&p)
            .next_back()
            .unwrap_or_else(|| self.points.iter().next_back().expect("nonempty"))
            .clone();
        let succ = self
            .points
            .range(&p..)
            .next()
            .unwrap_or_else(|| self.points.iter().next().expect("nonempty"))
            .clone();
        let old_gap = wrap_diff(&succ, &pred);
        let left = wrap_diff(&p, &pred);
        let right = wrap_diff(&succ, &p);
        self.remove_gap(&old_gap);
        self.add_gap(left);
        self.add_gap(right);
        self.points.insert(p);
    }

    fn max_gap(&self) -> Rat {
        self.gaps
            .keys()
            .next_back()
            .cloned()
            .expect("at least one gap once a point is inserted")
    }

    fn distinct_gap_count(&self) -> usize {
        self.gaps.len()
    }
}

/// `a - b` mod 1 where a gap of a single point is the full circle.
fn wrap_diff(a: &Rat, b: &Rat) -> Rat {
    if a > b {
        a - b
    } else {
        Rat::one() - b + a
    }
}

/// Exact incremental covering profile along the orbit of x.
pub fn covering_profile(map: &MapSpec, x: &CirclePoint, horizon: u64) -> Result<CoverProfile> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let mut tracker = GapTracker::new();
    let mut values = Vec::with_capacity(horizon as usize);
    let mut scaled = Vec::with_capacity(horizon as usize);
    let mut sup = Rat::zero();
    let mut argmax = 1u64;
    let half = Rat::new(BigInt::one(), BigInt::from(2));
    for (i, point) in map.orbit(x, horizon).enumerate() {
        let n = i as u64 + 1;
        tracker.insert(point);
        let r = tracker.max_gap() * &half;
        let s = &r * Rat::from_integer(BigInt::from(n));
        if s > sup {
            sup = s.clone();
            argmax = n;
        }
        values.push(r);
        scaled.push(s);
    }
    Ok(CoverProfile {
        values,
        scaled,
        sup_scaled: sup,
        argmax,
        periodic_detected: tracker.repeat_seen,
    })
}

/// Like [`covering_profile`], also checking the three-distance property at
/// every step (rotations carry at most 3 distinct gap lengths). Used as a
/// structural self-check; errors on violation.
pub fn covering_profile_three_gap_checked(
    map: &MapSpec,
    x: &CirclePoint,
    horizon: u64,
) -> Result<CoverProfile> {
    if !matches!(map, MapSpec::Rotation(_)) {
        return Err(Error::InvalidInput(
            "three-gap check applies to rotations only".into(),
        ));
    }
    let mut tracker = GapTracker::new();
    let mut values = Vec::with_capacity(horizon as usize);
    let mut scaled = Vec::with_capacity(horizon as usize);
    let mut sup = Rat::zero();
    let mut argmax = 1u64;
    let half = Rat::new(BigInt::one(), BigInt::from(2));
    for (i, point) in map.orbit(x, horizon).enumerate() {
        let n = i as u64 + 1;
        tracker.insert(point);
        if !tracker.repeat_seen && tracker.distinct_gap_count() > 3 {
            return Err(Error::CertificateInvalid(format!(
                "{} distinct gaps at n = {n}; rotations admit at most 3",
                tracker.distinct_gap_count()
            )));
        }
        let r = tracker.max_gap() * &half;
        let s = &r * Rat::from_integer(BigInt::from(n));
        if s > sup {
            sup = s.clone();
            argmax = n;
        }
        values.push(r);
        scaled.push(s);
    }
    Ok(CoverProfile {
        values,
        scaled,
        sup_scaled: sup,
        argmax,
        periodic_detected: tracker.repeat_seen,
    })
}

/// Rate summary over the tail `n >= n_min`: the sup of n * r_n with its
/// argmax, plus a checkpoint table at n_min, the powers of two above it,
/// and the horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub n_min: u64,
    pub sup_scaled: String,
    pub sup_scaled_decimal: String,
    pub argmax: u64,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    pub radius: String,
    pub scaled_decimal: String,
}

pub fn rate_report(profile: &CoverProfile, n_min: u64) -> Result<RateReport> {
    let horizon = profile.horizon();
    if n_min == 0 || n_min > horizon {
        return Err(Error::InvalidInput(format!(
            "n_min must lie in 1..={horizon}, got {n_min}"
        )));
    }
    let mut sup = Rat::zero();
    let mut argmax = n_min;
    for n in n_min..=horizon {
        let s = &profile.scaled[(n - 1) as usize];
        if *s > sup {
            sup = s.clone();
            argmax = n;
        }
    }
    let mut checkpoint_ns = vec![n_min];
    let mut p = 1u64;
    while p <= horizon {
        if p > n_min {
            checkpoint_ns.push(p);
        }
        p = p.saturating_mul(2);
    }
    if *checkpoint_ns.last().expect("nonempty") != horizon {
        checkpoint_ns.push(horizon);
    }
    let checkpoints = checkpoint_ns
        .into_iter()
        .map(|n| {
            let idx = (n - 1) as usize;
            Checkpoint {
                n,
                radius: format_ratio(&profile.values[idx]),
                scaled_decimal: crate::rat::decimal_string(&profile.scaled[idx], 12),
            }
        })
        .collect();
    Ok(RateReport {
        n_min,
        sup_scaled: format_ratio(&sup),
        sup_scaled_decimal: crate::rat::decimal_string(&sup, 12),
        argmax,
        checkpoints,
    })
}
