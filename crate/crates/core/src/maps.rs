//! The concrete measure-preserving maps of the circle, acting exactly on
//! points and arc sets.
//!
//! * `Rotation` — translation by a continued-fraction convergent p/q.
//! * `Doubling` — x -> 2x mod 1; forward-only (2-to-1, not invertible).
//! * `Odometer` — the dyadic adding machine: on the branch
//!   `[1 - 2^(1-k), 1 - 2^-k)` it translates by `2^(1-k) + 2^-k - 1`.
//! * `Iet` — interval exchange: a piecewise translation given by interval
//!   lengths and a permutation.
//!
//! Rotations, odometer, and IETs are piecewise translations, so images and
//! preimages of arc sets are exact and measure-preserving. The doubling map
//! supports exact preimages (two affine branches); its forward set-image is
//! refused because it would not preserve measure.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arcs::{Arc, ArcSet, CirclePoint};
use crate::error::Error;
use crate::rat::{format_ratio, parse_ratio, pow2, Rat};
use crate::Result;

// ---------------------------------------------------------------------------
// Continued fractions and rotation angles
// ---------------------------------------------------------------------------

/// A rotation angle realized as the exact convergent of a finite continued
/// fraction `[0; a1, ..., ad]` with all partial quotients >= 1.
///
/// The recorded convergent p/q differs from any deeper extension of the
/// quotient list by at most 1/q^2, so an orbit of length N stays within
/// N/q^2 of the ideal orbit. Experiments that need horizon N pick the depth
/// so that q >= N^2.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RotationAngle {
    quotients: Vec<u64>,
    value: Rat,
}

impl RotationAngle {
    pub fn from_quotients(quotients: &[u64]) -> Result<Self> {
        let value = convergent(quotients)?;
        if value >= Rat::one() {
            return Err(Error::InvalidInput(
                "quotient list [1] realizes rotation by 1; not a rotation angle in (0,1)"
                    .to_string(),
            ));
        }
        Ok(RotationAngle {
            quotients: quotients.to_vec(),
            value,
        })
    }

    /// Recovers the angle from an explicit rational in (0, 1).
    pub fn from_rational(theta: &Rat) -> Result<Self> {
        if theta <= &Rat::zero() || theta >= &Rat::one() {
            return Err(Error::InvalidInput(format!(
                "rotation angle must lie in (0,1), got {}",
                format_ratio(theta)
            )));
        }
        let quotients = continued_fraction(theta, None)?;
        Ok(RotationAngle {
            quotients,
            value: theta.clone(),
        })
    }

    /// Repeats the quotient pattern cyclically until the convergent
    /// denominator reaches `min_denom`.
    pub fn extended_to_denominator(pattern: &[u64], min_denom: &BigInt) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidInput("empty quotient pattern".to_string()));
        }
        let mut quotients: Vec<u64> = pattern.to_vec();
        loop {
            let value = convergent(&quotients)?;
            // the seed [1] realizes 1 and only becomes a rotation once extended
            if value < Rat::one() && value.denom() >= min_denom {
                return RotationAngle::from_quotients(&quotients);
            }
            let next = pattern[(quotients.len()) % pattern.len()];
            quotients.push(next);
        }
    }

    pub fn value(&self) -> &Rat {
        &self.value
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn denominator(&self) -> &BigInt {
        self.value.denom()
    }
}

/// Value of the finite continued fraction `[0; a1, ..., ad]` in lowest terms.
pub fn convergent(quotients: &[u64]) -> Result<Rat> {
    if quotients.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one partial quotient".to_string(),
        ));
    }
    if quotients.iter().any(|&a| a == 0) {
        return Err(Error::InvalidInput(
            "partial quotients must be >= 1".to_string(),
        ));
    }
    let (mut p_prev, mut p) = (BigInt::one(), BigInt::zero());
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    for &a in quotients {
        let a = BigInt::from(a);
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
    }
    Ok(Rat::new(p, q))
}

/// Partial quotients of a rational in (0, 1) by the Euclidean algorithm,
/// truncated at `max_depth` when given. The full expansion terminates with
/// last quotient >= 2 (except for 1/n), which makes round trips exact:
/// `convergent(continued_fraction(p/q, None)) == p/q`.
pub fn continued_fraction(theta: &Rat, max_depth: Option<usize>) -> Result<Vec<u64>> {
    if theta <= &Rat::zero() || theta >= &Rat::one() {
        return Err(Error::InvalidInput(format!(
            "continued fraction input must lie in (0,1), got {}",
            format_ratio(theta)
        )));
    }
    let mut num = theta.denom().clone(); // invariant: current value is den/num ... inverted below
    let mut den = theta.numer().clone();
    // value = den/num after the first inversion; we iterate gcd-style
    let mut quotients = Vec::new();
    while !den.is_zero() {
        if let Some(d) = max_depth {
            if quotients.len() == d {
                break;
            }
        }
        let (q, r) = num_integer::Integer::div_rem(&num, &den);
        let q = q.to_u64().ok_or_else(|| {
            Error::InvalidInput("partial quotient exceeds u64 range".to_string())
        })?;
        quotients.push(q);
        num = std::mem::replace(&mut den, r);
    }
    Ok(quotients)
}

// ---------------------------------------------------------------------------
// Interval exchange transformations
// ---------------------------------------------------------------------------

/// Interval exchange: cuts `[0,1)` into intervals of the given lengths and
/// reorders them by the permutation. `perm[i]` (1-based in serialized form)
/// is the position interval `i` takes in the image ordering.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Iet {
    lengths: Vec<Rat>,
    perm: Vec<usize>, // 0-based internally
    domain_starts: Vec<Rat>,
    image_starts: Vec<Rat>,
    image_order: Vec<usize>, // interval indices sorted by image position
    image_cuts: Vec<Rat>,    // ascending image-start values, parallel to image_order
}

impl Iet {
    pub fn new(lengths: Vec<Rat>, perm_one_based: Vec<usize>) -> Result<Self> {
        let m = lengths.len();
        if m == 0 {
            return Err(Error::InvalidInput("IET needs at least one interval".into()));
        }
        if lengths.iter().any(|l| !l.is_positive()) {
            return Err(Error::InvalidInput("IET lengths must be positive".into()));
        }
        let total: Rat = lengths.iter().fold(Rat::zero(), |a, b| a + b);
        if !total.is_one() {
            return Err(Error::InvalidInput(format!(
                "IET lengths must sum to 1, got {}",
                format_ratio(&total)
            )));
        }
        if perm_one_based.len() != m {
            return Err(Error::InvalidInput(
                "IET permutation length must match the number of intervals".into(),
            ));
        }
        let mut seen = vec![false; m];
        for &p in &perm_one_based {
            if p == 0 || p > m || seen[p - 1] {
                return Err(Error::InvalidInput(
                    "IET permutation must be a bijection on 1..=m".into(),
                ));
            }
            seen[p - 1] = true;
        }
        let perm: Vec<usize> = perm_one_based.iter().map(|&p| p - 1).collect();

        let mut domain_starts = Vec::with_capacity(m);
        let mut acc = Rat::zero();
        for l in &lengths {
            domain_starts.push(acc.clone());
            acc += l;
        }
        // interval at image position p is inv[p]
        let mut inv = vec![0usize; m];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut image_starts = vec![Rat::zero(); m];
        let mut image_cuts = Vec::with_capacity(m);
        let mut acc = Rat::zero();
        for &i in &inv {
            image_starts[i] = acc.clone();
            image_cuts.push(acc.clone());
            acc += &lengths[i];
        }
        Ok(Iet {
            lengths,
            perm,
            domain_starts,
            image_starts,
            image_order: inv,
            image_cuts,
        })
    }

    pub fn lengths(&self) -> &[Rat] {
        &self.lengths
    }

    pub fn perm_one_based(&self) -> Vec<usize> {
        self.perm.iter().map(|&p| p + 1).collect()
    }

    fn domain_index(&self, x: &Rat) -> usize {
        // last interval with start <= x
        self.domain_starts.partition_point(|s| s <= x) - 1
    }

    fn image_index(&self, y: &Rat) -> usize {
        let pos = self.image_cuts.partition_point(|s| s <= y) - 1;
        self.image_order[pos]
    }

    fn apply(&self, x: &CirclePoint) -> CirclePoint {
        let i = self.domain_index(x.value());
        CirclePoint::new(x.value() - &self.domain_starts[i] + &self.image_starts[i])
    }

    fn inverse_apply(&self, y: &CirclePoint) -> CirclePoint {
        let i = self.image_index(y.value());
        CirclePoint::new(y.value() - &self.image_starts[i] + &self.domain_starts[i])
    }

    fn piece_domain(&self, i: usize) -> ArcSet {
        ArcSet::from_arc(
            Arc::new(
                CirclePoint::new(self.domain_starts[i].clone()),
                self.lengths[i].clone(),
            )
            .expect("positive length"),
        )
    }

    fn piece_image(&self, i: usize) -> ArcSet {
        ArcSet::from_arc(
            Arc::new(
                CirclePoint::new(self.image_starts[i].clone()),
                self.lengths[i].clone(),
            )
            .expect("positive length"),
        )
    }

    fn image_set(&self, s: &ArcSet) -> ArcSet {
        let mut acc = ArcSet::empty();
        for i in 0..self.lengths.len() {
            let shift = &self.image_starts[i] - &self.domain_starts[i];
            let piece = s.intersect(&self.piece_domain(i)).translate(&shift);
            acc = acc.union(&piece);
        }
        acc
    }

    fn preimage_set(&self, s: &ArcSet) -> ArcSet {
        let mut acc = ArcSet::empty();
        for i in 0..self.lengths.len() {
            let shift = &self.domain_starts[i] - &self.image_starts[i];
            let piece = s.intersect(&self.piece_image(i)).translate(&shift);
            acc = acc.union(&piece);
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// The odometer (dyadic adding machine)
// ---------------------------------------------------------------------------

/// Branch index of a point: the smallest k >= 1 with x < 1 - 2^-k.
fn odometer_branch(x: &Rat) -> u32 {
    debug_assert!(*x >= Rat::zero() && *x < Rat::one());
    // 2^-k < 1 - x  <=>  k > log2(1/(1-x))
    let gap = Rat::one() - x;
    let mut k = 1u32;
    let mut reach = crate::rat::pow2(-1);
    while reach >= gap {
        reach = reach / Rat::from_integer(2.into());
        k += 1;
    }
    k
}

fn odometer_apply(x: &CirclePoint) -> CirclePoint {
    let k = odometer_branch(x.value());
    // x - 1 + 2^(1-k) + 2^-k
    let shift = pow2(1 - k as i64) + pow2(-(k as i64)) - Rat::one();
    CirclePoint::new(x.value() + shift)
}

fn odometer_inverse_apply(y: &CirclePoint) -> Result<CirclePoint> {
    if y.value().is_zero() {
        return Err(Error::NoOdometerPreimage);
    }
    // smallest k with 2^-k <= y
    let k = crate::rat::ceil_log2_inv(y.value()).max(1);
    let shift = Rat::one() - pow2(1 - k as i64) - pow2(-(k as i64));
    Ok(CirclePoint::new(y.value() + shift))
}

type Segment = (Rat, Rat);

/// Image of one non-wrapping segment under the odometer, as segments.
/// Segments ending at 1 cover a full tail of branches whose image is a
/// single dyadic interval at 0, so the output is always finite.
fn odometer_image_segments(lo: &Rat, hi: &Rat, out: &mut Vec<Segment>) {
    let one = Rat::one();
    let mut k: i64 = 1;
    loop {
        let d_lo = &one - pow2(1 - k); // 1 - 2^(1-k)
        if &d_lo >= hi {
            break;
        }
        if hi.is_one() && *lo <= d_lo {
            // branches k' >= k lie inside [lo, 1); their union maps onto [0, 2^(1-k))
            out.push((Rat::zero(), pow2(1 - k)));
            break;
        }
        let d_hi = &one - pow2(-k);
        let piece_lo = lo.clone().max(d_lo.clone());
        let piece_hi = hi.clone().min(d_hi);
        if piece_lo < piece_hi {
            let shift = pow2(1 - k) + pow2(-k) - &one;
            out.push((&piece_lo + &shift, &piece_hi + &shift));
        }
        k += 1;
    }
}

/// Preimage of one non-wrapping segment under the odometer.
/// Segments starting at 0 absorb the tail of branch images near 0, whose
/// preimage is a single interval ending at 1.
fn odometer_preimage_segments(lo: &Rat, hi: &Rat, out: &mut Vec<Segment>) {
    let one = Rat::one();
    let mut k: i64 = 1;
    loop {
        let i_hi = pow2(1 - k); // 2^(1-k)
        if &i_hi <= lo {
            break;
        }
        if lo.is_zero() && &i_hi <= hi {
            // branch images k' >= k lie inside [0, hi); preimage is [1 - 2^(1-k), 1)
            out.push((&one - &i_hi, one.clone()));
            break;
        }
        let i_lo = pow2(-k);
        let piece_lo = lo.clone().max(i_lo);
        let piece_hi = hi.clone().min(i_hi);
        if piece_lo < piece_hi {
            let shift = &one - pow2(1 - k) - pow2(-k);
            out.push((&piece_lo + &shift, &piece_hi + &shift));
        }
        k += 1;
    }
}

// ---------------------------------------------------------------------------
// Rokhlin towers for the odometer
// ---------------------------------------------------------------------------

/// The height-2^K dyadic tower: level i is the single arc
/// `tau^i([0, 2^-K))`; the levels partition the circle.
///
/// Level i sits at the dyadic cell whose index is the K-bit reversal of i,
/// which is what makes iteration on dyadic sets pure index arithmetic.
#[derive(Clone, Debug)]
pub struct Tower {
    exponent: u32,
    levels: Vec<Arc>,
}

impl Tower {
    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn height(&self) -> u64 {
        1u64 << self.exponent
    }

    pub fn base(&self) -> &Arc {
        &self.levels[0]
    }

    pub fn levels(&self) -> &[Arc] {
        &self.levels
    }
}

/// Builds the dyadic tower of height 2^K over the base `[0, 2^-K)`.
pub fn odometer_tower(k: u32) -> Result<Tower> {
    if k == 0 || k > 40 {
        return Err(Error::InvalidInput(format!(
            "tower exponent must lie in 1..=40, got {k}"
        )));
    }
    let height = 1u64 << k;
    let width = pow2(-(k as i64));
    let levels = (0..height)
        .map(|i| {
            let cell = crate::dyadic::reverse_bits_k(i, k);
            Arc::new(
                CirclePoint::new(Rat::new(BigInt::from(cell), BigInt::one() << k as usize)),
                width.clone(),
            )
            .expect("positive width")
        })
        .collect();
    Ok(Tower {
        exponent: k,
        levels,
    })
}

// ---------------------------------------------------------------------------
// MapSpec
// ---------------------------------------------------------------------------

/// One of the concrete maps. Rotation, Odometer, and IET are invertible;
/// Doubling is 2-to-1 and only supports forward orbits and exact preimages.
#[derive(Clone, PartialEq, Debug)]
pub enum MapSpec {
    Rotation(RotationAngle),
    Doubling,
    Odometer,
    Iet(Iet),
}

impl MapSpec {
    pub fn rotation_from_quotients(quotients: &[u64]) -> Result<Self> {
        Ok(MapSpec::Rotation(RotationAngle::from_quotients(quotients)?))
    }

    pub fn rotation_from_rational(theta: &Rat) -> Result<Self> {
        Ok(MapSpec::Rotation(RotationAngle::from_rational(theta)?))
    }

    pub fn iet(lengths: Vec<Rat>, perm_one_based: Vec<usize>) -> Result<Self> {
        Ok(MapSpec::Iet(Iet::new(lengths, perm_one_based)?))
    }

    pub fn is_invertible(&self) -> bool {
        !matches!(self, MapSpec::Doubling)
    }

    /// One exact forward step.
    pub fn apply(&self, x: &CirclePoint) -> CirclePoint {
        match self {
            MapSpec::Rotation(angle) => x.add(angle.value()),
            MapSpec::Doubling => CirclePoint::new(x.value() * Rat::from_integer(2.into())),
            MapSpec::Odometer => odometer_apply(x),
            MapSpec::Iet(iet) => iet.apply(x),
        }
    }

    /// One exact backward step; `apply(inverse_apply(x)) == x`.
    pub fn inverse_apply(&self, x: &CirclePoint) -> Result<CirclePoint> {
        match self {
            MapSpec::Rotation(angle) => Ok(x.add(&(-angle.value().clone()))),
            MapSpec::Doubling => Err(Error::NotInvertible),
            MapSpec::Odometer => odometer_inverse_apply(x),
            MapSpec::Iet(iet) => Ok(iet.inverse_apply(x)),
        }
    }

    /// Streaming orbit `tau(x), tau^2(x), ..., tau^N(x)`.
    pub fn orbit<'a>(&'a self, x: &CirclePoint, n: u64) -> Orbit<'a> {
        Orbit {
            map: self,
            current: x.clone(),
            remaining: n,
        }
    }

    /// `tau^n(x)` by iteration.
    pub fn iterate(&self, x: &CirclePoint, n: u64) -> CirclePoint {
        let mut cur = x.clone();
        for _ in 0..n {
            cur = self.apply(&cur);
        }
        cur
    }

    /// Exact `tau^{ -1 }(S)`. Preserves measure for every map family
    /// (for the doubling map the two affine branches each contribute half).
    pub fn preimage_set(&self, s: &ArcSet) -> ArcSet {
        match self {
            MapSpec::Rotation(angle) => s.translate(&-angle.value().clone()),
            MapSpec::Doubling => {
                let half = Rat::new(BigInt::one(), BigInt::from(2));
                let mut segments = Vec::with_capacity(2 * s.arcs().len() + 2);
                for (lo, hi) in s.to_segments() {
                    let l = &lo * &half;
                    let h = &hi * &half;
                    segments.push((&l + &half, &h + &half));
                    segments.push((l, h));
                }
                ArcSet::from_raw_segments(segments)
            }
            MapSpec::Odometer => {
                let mut segments = Vec::new();
                for (lo, hi) in s.to_segments() {
                    odometer_preimage_segments(&lo, &hi, &mut segments);
                }
                ArcSet::from_raw_segments(segments)
            }
            MapSpec::Iet(iet) => iet.preimage_set(s),
        }
    }

    /// Exact forward image for invertible maps; errors for Doubling, whose
    /// pointwise image would not preserve measure.
    pub fn image_set(&self, s: &ArcSet) -> Result<ArcSet> {
        match self {
            MapSpec::Rotation(angle) => Ok(s.translate(angle.value())),
            MapSpec::Doubling => Err(Error::NotInvertible),
            MapSpec::Odometer => {
                let mut segments = Vec::new();
                for (lo, hi) in s.to_segments() {
                    odometer_image_segments(&lo, &hi, &mut segments);
                }
                Ok(ArcSet::from_raw_segments(segments))
            }
            MapSpec::Iet(iet) => Ok(iet.image_set(s)),
        }
    }

    /// Exact `tau^{-n}(S)` by iterated preimage.
    pub fn preimage_set_n(&self, s: &ArcSet, n: u64) -> ArcSet {
        let mut cur = s.clone();
        for _ in 0..n {
            cur = self.preimage_set(&cur);
        }
        cur
    }

    /// Exact `tau^n(S)` by iterated image (invertible maps only).
    pub fn image_set_n(&self, s: &ArcSet, n: u64) -> Result<ArcSet> {
        let mut cur = s.clone();
        for _ in 0..n {
            cur = self.image_set(&cur)?;
        }
        Ok(cur)
    }
}

pub struct Orbit<'a> {
    map: &'a MapSpec,
    current: CirclePoint,
    remaining: u64,
}

impl Iterator for Orbit<'_> {
    type Item = CirclePoint;

    fn next(&mut self) -> Option<CirclePoint> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.current = self.map.apply(&self.current);
        Some(self.current.clone())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

// ---------------------------------------------------------------------------
// Serialization: tagged JSON for experiment configs
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MapRepr {
    Rotation { quotients: Vec<u64> },
    Doubling {},
    Odometer {},
    Iet { lengths: Vec<String>, perm: Vec<usize> },
}

impl Serialize for MapSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            MapSpec::Rotation(angle) => MapRepr::Rotation {
                quotients: angle.quotients.clone(),
            },
            MapSpec::Doubling => MapRepr::Doubling {},
            MapSpec::Odometer => MapRepr::Odometer {},
            MapSpec::Iet(iet) => MapRepr::Iet {
                lengths: iet.lengths.iter().map(|l| format_ratio(l)).collect(),
                perm: iet.perm_one_based(),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = MapRepr::deserialize(d)?;
        match repr {
            MapRepr::Rotation { quotients } => {
                MapSpec::rotation_from_quotients(&quotients).map_err(D::Error::custom)
            }
            MapRepr::Doubling {} => Ok(MapSpec::Doubling),
            MapRepr::Odometer {} => Ok(MapSpec::Odometer),
            MapRepr::Iet { lengths, perm } => {
                let lengths = lengths
                    .iter()
                    .map(|s| parse_ratio(s))
                    .collect::<Result<Vec<Rat>>>()
                    .map_err(D::Error::custom)?;
                MapSpec::iet(lengths, perm).map_err(D::Error::custom)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn pt(n: i64, d: i64) -> CirclePoint {
        CirclePoint::new(rat(n, d))
    }

    fn arcset(pairs: &[((i64, i64), (i64, i64))]) -> ArcSet {
        ArcSet::normalize(
            pairs
                .iter()
                .map(|&((sn, sd), (ln, ld))| {
                    Arc::new(CirclePoint::new(rat(sn, sd)), rat(ln, ld)).unwrap()
                })
                .collect(),
        )
    }

    #[test]
    fn continued_fraction_examples() {
        assert_eq!(continued_fraction(&rat(2, 7), None).unwrap(), vec![3, 2]);
        assert_eq!(continued_fraction(&rat(1, 2), None).unwrap(), vec![2]);
        assert_eq!(continued_fraction(&rat(5, 8), None).unwrap(), vec![1, 1, 1, 2]);
        assert_eq!(
            continued_fraction(&rat(5, 8), Some(2)).unwrap(),
            vec![1, 1]
        );
    }

    #[test]
    fn convergent_examples() {
        assert_eq!(convergent(&[1, 1, 1, 1, 1]).unwrap(), rat(5, 8));
        assert_eq!(convergent(&[2]).unwrap(), rat(1, 2));
        assert_eq!(convergent(&[3, 2]).unwrap(), rat(2, 7));
        assert_eq!(convergent(&[1, 1, 1, 2]).unwrap(), rat(5, 8));
        assert!(RotationAngle::from_quotients(&[1]).is_err());
        assert!(convergent(&[]).is_err());
        assert!(convergent(&[0, 2]).is_err());
    }

    #[test]
    fn convergent_round_trip() {
        for (p, q) in [(2i64, 7i64), (5, 8), (355, 1130), (13, 29), (1, 1000)] {
            let theta = rat(p, q);
            let cf = continued_fraction(&theta, None).unwrap();
            assert_eq!(convergent(&cf).unwrap(), theta);
            if cf.len() > 1 {
                assert!(*cf.last().unwrap() >= 2, "canonical form for {p}/{q}: {cf:?}");
            }
        }
    }

    #[test]
    fn doubling_examples() {
        let m = MapSpec::Doubling;
        assert_eq!(m.apply(&pt(1, 3)), pt(2, 3));
        assert_eq!(m.apply(&pt(2, 3)), pt(1, 3));
        let orbit: Vec<CirclePoint> = m.orbit(&pt(1, 3), 4).collect();
        assert_eq!(orbit, vec![pt(2, 3), pt(1, 3), pt(2, 3), pt(1, 3)]);
        assert!(m.inverse_apply(&pt(1, 3)).is_err());
        assert!(m.image_set(&ArcSet::full()).is_err());
    }

    #[test]
    fn rotation_examples() {
        let m = MapSpec::rotation_from_rational(&rat(1, 2)).unwrap();
        let orbit: Vec<CirclePoint> = m.orbit(&pt(0, 1), 3).collect();
        assert_eq!(orbit, vec![pt(1, 2), pt(0, 1), pt(1, 2)]);

        let m58 = MapSpec::rotation_from_rational(&rat(5, 8)).unwrap();
        assert_eq!(m58.inverse_apply(&pt(0, 1)).unwrap(), pt(3, 8));
        let s = arcset(&[((0, 1), (1, 4))]);
        assert_eq!(m58.preimage_set(&s), arcset(&[((3, 8), (1, 4))]));
        assert_eq!(
            m58.image_set(&s).unwrap(),
            arcset(&[((5, 8), (1, 4))])
        );
    }

    #[test]
    fn odometer_point_examples() {
        let m = MapSpec::Odometer;
        assert_eq!(m.apply(&pt(0, 1)), pt(1, 2));
        assert_eq!(m.apply(&pt(1, 2)), pt(1, 4));
        let orbit: Vec<CirclePoint> = m.orbit(&pt(0, 1), 4).collect();
        assert_eq!(orbit, vec![pt(1, 2), pt(1, 4), pt(3, 4), pt(1, 8)]);
        assert_eq!(m.inverse_apply(&pt(1, 2)).unwrap(), pt(0, 1));
        assert_eq!(m.inverse_apply(&pt(1, 4)).unwrap(), pt(1, 2));
        assert!(m.inverse_apply(&pt(0, 1)).is_err());
    }

    #[test]
    fn odometer_set_examples() {
        let m = MapSpec::Odometer;
        let half = arcset(&[((0, 1), (1, 2))]);
        assert_eq!(m.preimage_set(&half), arcset(&[((1, 2), (1, 2))]));
        let quarter = arcset(&[((0, 1), (1, 4))]);
        assert_eq!(m.image_set(&quarter).unwrap(), arcset(&[((1, 2), (1, 4))]));
        // round trip through a set with a wrap arc
        let s = arcset(&[((7, 8), (1, 4))]);
        let pre = m.preimage_set(&s);
        assert_eq!(pre.measure(), s.measure());
        assert_eq!(m.image_set(&pre).unwrap(), s);
    }

    #[test]
    fn doubling_preimage_branches() {
        let m = MapSpec::Doubling;
        let half = arcset(&[((0, 1), (1, 2))]);
        assert_eq!(
            m.preimage_set(&half),
            arcset(&[((0, 1), (1, 4)), ((1, 2), (1, 4))])
        );
        assert_eq!(m.preimage_set(&half).measure(), rat(1, 2));
    }

    #[test]
    fn tower_examples() {
        let t1 = odometer_tower(1).unwrap();
        assert_eq!(t1.height(), 2);
        assert_eq!(*t1.levels()[0].start().value(), rat(0, 1));
        assert_eq!(*t1.levels()[1].start().value(), rat(1, 2));

        let t2 = odometer_tower(2).unwrap();
        assert_eq!(t2.height(), 4);
        let union = ArcSet::normalize(t2.levels().to_vec());
        assert!(union.is_full());

        // level i+1 is the exact image of level i
        let m = MapSpec::Odometer;
        for k in 1..=6u32 {
            let t = odometer_tower(k).unwrap();
            let mut total = Rat::zero();
            for (i, level) in t.levels().iter().enumerate() {
                total += level.length();
                if i + 1 < t.levels().len() {
                    let img = m
                        .image_set(&ArcSet::from_arc(level.clone()))
                        .unwrap();
                    assert_eq!(img, ArcSet::from_arc(t.levels()[i + 1].clone()));
                }
            }
            assert!(total.is_one());
        }
    }

    #[test]
    fn iet_rotation_equivalence() {
        // lengths [1-a, a] with the swap permutation is rotation by a
        let a = rat(3, 10);
        let iet = MapSpec::iet(vec![rat(7, 10), rat(3, 10)], vec![2, 1]).unwrap();
        let rot = MapSpec::rotation_from_rational(&a).unwrap();
        for i in 0..20i64 {
            let x = pt(i, 20);
            assert_eq!(iet.apply(&x), rot.apply(&x));
            assert_eq!(iet.inverse_apply(&x).unwrap(), rot.inverse_apply(&x).unwrap());
        }
        let s = arcset(&[((1, 5), (1, 4)), ((9, 10), (1, 5))]);
        assert_eq!(iet.image_set(&s).unwrap(), rot.image_set(&s).unwrap());
        assert_eq!(iet.preimage_set(&s), rot.preimage_set(&s));
    }

    #[test]
    fn iet_validation() {
        assert!(MapSpec::iet(vec![rat(1, 2), rat(1, 3)], vec![2, 1]).is_err());
        assert!(MapSpec::iet(vec![rat(1, 2), rat(1, 2)], vec![1, 1]).is_err());
        assert!(MapSpec::iet(vec![], vec![]).is_err());
    }

    #[test]
    fn map_serde_round_trip() {
        let maps = vec![
            MapSpec::rotation_from_quotients(&[1, 1, 1, 1, 1]).unwrap(),
            MapSpec::Doubling,
            MapSpec::Odometer,
            MapSpec::iet(vec![rat(1, 3), rat(1, 3), rat(1, 3)], vec![3, 1, 2]).unwrap(),
        ];
        for m in maps {
            let json = serde_json::to_string(&m).unwrap();
            let back: MapSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(m, back);
        }
        let json = serde_json::to_string(&MapSpec::Doubling).unwrap();
        assert_eq!(json, r#"{"doubling":{}}"#);
        let rot: MapSpec = serde_json::from_str(r#"{"rotation":{"quotients":[2]}}"#).unwrap();
        match rot {
            MapSpec::Rotation(a) => assert_eq!(*a.value(), rat(1, 2)),
            _ => panic!("expected rotation"),
        }
    }

    #[test]
    fn rotation_depth_extension() {
        let angle =
            RotationAngle::extended_to_denominator(&[1], &BigInt::from(100_000_000u64)).unwrap();
        assert!(angle.denominator() >= &BigInt::from(100_000_000u64));
        assert!(angle.depth() >= 25);
        // golden pattern: consecutive Fibonacci convergent
        let prev = convergent(&angle.quotients()[..angle.depth() - 1]).unwrap();
        let diff = (angle.value() - &prev).abs();
        let q = Rat::from_integer(prev.denom().clone());
        assert!(diff <= Rat::one() / (&q * &q));
    }
}
