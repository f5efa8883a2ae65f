//! Exact set algebra on the circle `[0, 1)`.
//!
//! Every measurable set in this crate is an [`ArcSet`]: a canonical finite
//! union of half-open arcs `[start, start + length)` taken mod 1. Canonical
//! means the arcs are pairwise disjoint, sorted by start, and maximally
//! merged (no two arcs abut, including across the wrap point). With that
//! representation, Lebesgue measure is the exact rational sum of lengths
//! and all Boolean operations are exact.
//!
//! Arcs are half-open. Closed balls differ from their half-open arcs on a
//! finite (null) set; hit tests that need closed-ball semantics do an
//! explicit endpoint comparison instead of going through `ArcSet`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rat::{format_ratio, frac_mod_1, Rat};
use crate::Result;

/// A point of the circle: an arbitrary-precision rational reduced mod 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CirclePoint(Rat);

impl CirclePoint {
    /// Reduces any rational to its representative in `[0, 1)`.
    pub fn new(value: Rat) -> Self {
        CirclePoint(frac_mod_1(&value))
    }

    pub fn zero() -> Self {
        CirclePoint(Rat::zero())
    }

    pub fn value(&self) -> &Rat {
        &self.0
    }

    pub fn into_value(self) -> Rat {
        self.0
    }

    /// Translation mod 1.
    pub fn add(&self, offset: &Rat) -> Self {
        CirclePoint::new(&self.0 + offset)
    }

    /// Circle distance `min(|a-b|, 1-|a-b|)`; always in `[0, 1/2]`.
    pub fn dist(&self, other: &CirclePoint) -> Rat {
        let d = if self.0 >= other.0 {
            &self.0 - &other.0
        } else {
            &other.0 - &self.0
        };
        let wrap = Rat::one() - &d;
        if d <= wrap {
            d
        } else {
            wrap
        }
    }
}

impl std::fmt::Debug for CirclePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", format_ratio(&self.0))
    }
}

impl From<Rat> for CirclePoint {
    fn from(value: Rat) -> Self {
        CirclePoint::new(value)
    }
}

/// Half-open arc `[start, start + length)` mod 1; may wrap past 0.
/// Length 1 is the full circle.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Arc {
    start: CirclePoint,
    length: Rat,
}

impl Arc {
    pub fn new(start: CirclePoint, length: Rat) -> Result<Self> {
        if length <= Rat::zero() || length > Rat::one() {
            return Err(Error::InvalidInput(format!(
                "arc length must lie in (0, 1], got {}",
                format_ratio(&length)
            )));
        }
        Ok(Arc { start, length })
    }

    /// Arc from endpoints: `[a, b)` mod 1, where `a == b` means the full circle.
    pub fn from_endpoints(a: CirclePoint, b: CirclePoint) -> Self {
        let length = if a == b {
            Rat::one()
        } else {
            frac_mod_1(&(b.value() - a.value()))
        };
        Arc { start: a, length }
    }

    pub fn start(&self) -> &CirclePoint {
        &self.start
    }

    pub fn length(&self) -> &Rat {
        &self.length
    }

    /// True when the arc crosses the wrap point (start + length > 1).
    pub fn wraps(&self) -> bool {
        self.start.value() + &self.length > Rat::one()
    }

    pub fn contains(&self, x: &CirclePoint) -> bool {
        let end = self.start.value() + &self.length;
        if end <= Rat::one() {
            x.value() >= self.start.value() && *x.value() < end
        } else {
            x.value() >= self.start.value() || *x.value() < end - Rat::one()
        }
    }

    /// Midpoint of the arc, a convenient interior sample point.
    pub fn midpoint(&self) -> CirclePoint {
        self.start.add(&(&self.length / Rat::from_integer(2.into())))
    }
}

#[derive(Serialize, Deserialize)]
struct ArcRepr {
    start: String,
    length: String,
}

impl Serialize for Arc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ArcRepr {
            start: format_ratio(self.start.value()),
            length: format_ratio(&self.length),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Arc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ArcRepr::deserialize(d)?;
        let start = crate::rat::parse_ratio(&repr.start).map_err(serde::de::Error::custom)?;
        let length = crate::rat::parse_ratio(&repr.length).map_err(serde::de::Error::custom)?;
        Arc::new(CirclePoint::new(start), length).map_err(serde::de::Error::custom)
    }
}

/// Canonical finite union of arcs. The empty list is the empty set.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArcSet {
    arcs: Vec<Arc>,
}

/// Non-wrapping half-open segment `[lo, hi)` with `0 <= lo < hi <= 1`.
type Segment = (Rat, Rat);

impl ArcSet {
    pub fn empty() -> Self {
        ArcSet { arcs: Vec::new() }
    }

    pub fn full() -> Self {
        ArcSet {
            arcs: vec![Arc {
                start: CirclePoint::zero(),
                length: Rat::one(),
            }],
        }
    }

    /// Canonicalizes an arbitrary list of arcs into an equal point set.
    /// Idempotent: normalizing a canonical set returns it unchanged.
    pub fn normalize(arcs: Vec<Arc>) -> Self {
        let mut segments = Vec::with_capacity(arcs.len() + 4);
        for arc in arcs {
            push_unrolled(&mut segments, arc);
        }
        ArcSet::from_segments(segments)
    }

    pub fn from_arc(arc: Arc) -> Self {
        ArcSet::normalize(vec![arc])
    }

    /// Builds the canonical set from non-wrapping segments in `[0, 1]`.
    fn from_segments(mut segments: Vec<Segment>) -> Self {
        segments.retain(|(lo, hi)| lo < hi);
        if segments.is_empty() {
            return ArcSet::empty();
        }
        segments.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        for (lo, hi) in segments {
            match merged.last_mut() {
                Some((_, last_hi)) if lo <= *last_hi => {
                    if hi > *last_hi {
                        *last_hi = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        // whole circle?
        if merged.len() == 1 && merged[0].0.is_zero() && merged[0].1.is_one() {
            return ArcSet::full();
        }
        // merge across the wrap point
        let mut wrap_arc = None;
        if merged.first().map(|s| s.0.is_zero()).unwrap_or(false)
            && merged.last().map(|s| s.1.is_one()).unwrap_or(false)
            && merged.len() >= 2
        {
            let (_, first_hi) = merged.remove(0);
            let (last_lo, _) = merged.pop().expect("len >= 2");
            let length = (Rat::one() - &last_lo) + &first_hi;
            wrap_arc = Some(Arc {
                start: CirclePoint(last_lo),
                length,
            });
        }
        let mut arcs: Vec<Arc> = merged
            .into_iter()
            .map(|(lo, hi)| Arc {
                length: &hi - &lo,
                start: CirclePoint(lo),
            })
            .collect();
        if let Some(arc) = wrap_arc {
            arcs.push(arc); // largest start sorts last
        }
        ArcSet { arcs }
    }

    /// The canonical arcs, sorted by start; at most the last one wraps.
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.measure().is_one()
    }

    /// Exact Lebesgue measure: the sum of arc lengths, in `[0, 1]`.
    pub fn measure(&self) -> Rat {
        self.arcs
            .iter()
            .fold(Rat::zero(), |acc, arc| acc + &arc.length)
    }

    /// Unrolls wrap arcs into one or two non-wrapping segments.
    pub(crate) fn to_segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.arcs.len() + 1);
        for arc in &self.arcs {
            push_unrolled(&mut out, arc.clone());
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub(crate) fn from_raw_segments(segments: Vec<Segment>) -> Self {
        ArcSet::from_segments(segments)
    }

    pub fn union(&self, other: &ArcSet) -> ArcSet {
        let mut segments = self.to_segments();
        segments.extend(other.to_segments());
        ArcSet::from_segments(segments)
    }

    pub fn intersect(&self, other: &ArcSet) -> ArcSet {
        let a = self.to_segments();
        let b = other.to_segments();
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.clone().max(b[j].0.clone());
            let hi = a[i].1.clone().min(b[j].1.clone());
            if lo < hi {
                out.push((lo, hi));
            }
            if a[i].1 <= b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        ArcSet::from_segments(out)
    }

    pub fn complement(&self) -> ArcSet {
        let segments = self.to_segments();
        let mut out = Vec::with_capacity(segments.len() + 1);
        let mut cursor = Rat::zero();
        for (lo, hi) in segments {
            if cursor < lo {
                out.push((cursor, lo));
            }
            cursor = hi;
        }
        if cursor < Rat::one() {
            out.push((cursor, Rat::one()));
        }
        ArcSet::from_segments(out)
    }

    pub fn minus(&self, other: &ArcSet) -> ArcSet {
        self.intersect(&other.complement())
    }

    /// Membership in the half-open union. Binary search over arc starts.
    pub fn contains(&self, x: &CirclePoint) -> bool {
        if self.arcs.is_empty() {
            return false;
        }
        let idx = self.arcs.partition_point(|arc| arc.start <= *x);
        if idx > 0 && self.arcs[idx - 1].contains(x) {
            return true;
        }
        // a wrap arc (always last) can cover points below every start
        idx == 0 && self.arcs.last().map(|a| a.contains(x)).unwrap_or(false)
    }

    /// Exact translation mod 1; canonical output.
    pub fn translate(&self, offset: &Rat) -> ArcSet {
        let arcs = self
            .arcs
            .iter()
            .map(|arc| Arc {
                start: arc.start.add(offset),
                length: arc.length.clone(),
            })
            .collect();
        ArcSet::normalize(arcs)
    }

    pub fn serialize_json(&self) -> String {
        serde_json::to_string(self).expect("arc set serialization cannot fail")
    }

    pub fn deserialize_json(s: &str) -> Result<ArcSet> {
        let raw: Vec<Arc> = serde_json::from_str(s)
            .map_err(|e| Error::InvalidInput(format!("bad arc set JSON: {e}")))?;
        Ok(ArcSet::normalize(raw))
    }
}

fn push_unrolled(segments: &mut Vec<Segment>, arc: Arc) {
    let lo = arc.start.0;
    let end = &lo + &arc.length;
    if end <= Rat::one() {
        segments.push((lo, end));
    } else {
        segments.push((Rat::zero(), &end - Rat::one()));
        segments.push((lo, Rat::one()));
    }
}

/// Gaps between circularly consecutive distinct points, ascending.
/// Duplicates collapse; the gaps of a single point are `[1]`.
/// The gaps always sum to exactly 1.
pub fn circular_gaps(points: &[CirclePoint]) -> Result<Vec<Rat>> {
    if points.is_empty() {
        return Err(Error::EmptyPointList);
    }
    let mut sorted: Vec<&CirclePoint> = points.iter().collect();
    sorted.sort();
    sorted.dedup_by(|a, b| a == b);
    let mut gaps = Vec::with_capacity(sorted.len());
    for pair in sorted.windows(2) {
        gaps.push(pair[1].value() - pair[0].value());
    }
    let wrap = Rat::one() - sorted.last().unwrap().value() + sorted.first().unwrap().value();
    gaps.push(wrap);
    gaps.sort();
    Ok(gaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{parse_ratio, rat};

    fn arc(start: (i64, i64), len: (i64, i64)) -> Arc {
        Arc::new(CirclePoint::new(rat(start.0, start.1)), rat(len.0, len.1)).unwrap()
    }

    fn set(arcs: &[((i64, i64), (i64, i64))]) -> ArcSet {
        ArcSet::normalize(arcs.iter().map(|&(s, l)| arc(s, l)).collect())
    }

    #[test]
    fn overlapping_arcs_merge() {
        // [0.2, 0.4) u [0.3, 0.5) = [0.2, 0.5)
        let s = set(&[((1, 5), (1, 5)), ((3, 10), (1, 5))]);
        assert_eq!(s.arcs().len(), 1);
        assert_eq!(*s.arcs()[0].start().value(), rat(1, 5));
        assert_eq!(*s.arcs()[0].length(), rat(3, 10));
    }

    #[test]
    fn wrap_merge_produces_single_arc() {
        // [0.9, 1.0) u [0.0, 0.1) wraps into one arc of length 1/5
        let s = set(&[((9, 10), (1, 10)), ((0, 1), (1, 10))]);
        assert_eq!(s.arcs().len(), 1);
        assert!(s.arcs()[0].wraps());
        assert_eq!(*s.arcs()[0].start().value(), rat(9, 10));
        assert_eq!(s.measure(), rat(1, 5));
    }

    #[test]
    fn empty_input_gives_empty_set() {
        let s = ArcSet::normalize(vec![]);
        assert!(s.is_empty());
        assert_eq!(s.measure(), rat(0, 1));
    }

    #[test]
    fn full_circle_measure_one() {
        assert_eq!(ArcSet::full().measure(), rat(1, 1));
        // two halves cover everything
        let s = set(&[((0, 1), (1, 2)), ((1, 2), (1, 2))]);
        assert_eq!(s, ArcSet::full());
    }

    #[test]
    fn complement_of_half() {
        let s = set(&[((0, 1), (1, 2))]);
        let c = s.complement();
        assert_eq!(c, set(&[((1, 2), (1, 2))]));
        assert!(s.intersect(&c).is_empty());
        assert_eq!(s.intersect(&s.complement()).measure(), rat(0, 1));
    }

    #[test]
    fn intersection_example() {
        let a = set(&[((0, 1), (1, 2))]);
        let b = set(&[((1, 4), (1, 2))]);
        let i = a.intersect(&b);
        assert_eq!(i, set(&[((1, 4), (1, 4))]));
        assert_eq!(i.measure(), rat(1, 4));
    }

    #[test]
    fn union_of_disjoint_arcs_adds_measure() {
        let n = 8i64;
        let arcs: Vec<Arc> = (0..n)
            .map(|i| arc((i, n), (1, 2 * n)))
            .collect();
        let s = ArcSet::normalize(arcs);
        assert_eq!(s.measure(), rat(1, 2));
        assert_eq!(s.arcs().len(), n as usize);
    }

    #[test]
    fn membership_endpoints() {
        let s = set(&[((0, 1), (1, 2))]);
        assert!(s.contains(&CirclePoint::new(rat(0, 1))));
        assert!(!s.contains(&CirclePoint::new(rat(1, 2))));
        let w = set(&[((9, 10), (1, 5))]);
        assert!(w.contains(&CirclePoint::new(rat(1, 20))));
        assert!(w.contains(&CirclePoint::new(rat(9, 10))));
        assert!(!w.contains(&CirclePoint::new(rat(1, 10))));
        assert!(!w.contains(&CirclePoint::new(rat(1, 2))));
    }

    #[test]
    fn gaps_examples() {
        let pts: Vec<CirclePoint> = [rat(0, 1), rat(1, 4), rat(1, 2)]
            .into_iter()
            .map(CirclePoint::new)
            .collect();
        assert_eq!(
            circular_gaps(&pts).unwrap(),
            vec![rat(1, 4), rat(1, 4), rat(1, 2)]
        );

        let single = vec![CirclePoint::new(rat(0, 1))];
        assert_eq!(circular_gaps(&single).unwrap(), vec![rat(1, 1)]);

        let n = 7i64;
        let equal: Vec<CirclePoint> = (0..n).map(|i| CirclePoint::new(rat(i, n))).collect();
        let gaps = circular_gaps(&equal).unwrap();
        assert_eq!(gaps.len(), n as usize);
        assert!(gaps.iter().all(|g| *g == rat(1, n)));

        assert!(circular_gaps(&[]).is_err());

        // duplicates collapse
        let dup: Vec<CirclePoint> = [rat(0, 1), rat(0, 1), rat(1, 2)]
            .into_iter()
            .map(CirclePoint::new)
            .collect();
        assert_eq!(circular_gaps(&dup).unwrap(), vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn serde_round_trip_is_canonical() {
        let s = set(&[((3, 5), (1, 10)), ((9, 10), (1, 5))]);
        let json = s.serialize_json();
        assert!(json.contains("\"start\""));
        let back = ArcSet::deserialize_json(&json).unwrap();
        assert_eq!(s, back);
        // parse accepts non-canonical input and normalizes
        let raw = r#"[{"start":"1/2","length":"1/4"},{"start":"5/8","length":"1/4"}]"#;
        let merged = ArcSet::deserialize_json(raw).unwrap();
        assert_eq!(merged.arcs().len(), 1);
        assert_eq!(merged.measure(), parse_ratio("3/8").unwrap());
    }
}
