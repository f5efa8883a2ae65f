//! Level arithmetic for dyadic odometer towers.
//!
//! The cells `[c/2^K, (c+1)/2^K)` are exactly the levels of the height-2^K
//! tower, with `level(cell c) = reverse of the K bits of c`. The odometer
//! maps the cell at level i onto the cell at level `(i+1) mod 2^K` as a
//! set, so iterating the map on any union of cells is index arithmetic on
//! residues mod 2^K. Sweep-out measures over thousands of time steps then
//! come out of one linear pass instead of thousands of arc operations.

use num_bigint::BigInt;
use num_traits::One;

use crate::arcs::{Arc, ArcSet, CirclePoint};
use crate::error::Error;
use crate::rat::{pow2, Rat};
use crate::Result;

/// Reversal of the low `k` bits of `i`.
pub fn reverse_bits_k(i: u64, k: u32) -> u64 {
    debug_assert!(k >= 1 && k <= 63);
    i.reverse_bits() >> (64 - k)
}

/// Largest supported tower exponent; 2^28 bits of bitset is 32 MiB.
pub const MAX_TOWER_EXPONENT: u32 = 28;

/// A set of levels of the 2^k tower, as a bitset over residues mod 2^k.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LevelSet {
    k: u32,
    words: Vec<u64>,
    count: u64,
}

impl LevelSet {
    pub fn empty(k: u32) -> Result<Self> {
        if k == 0 || k > MAX_TOWER_EXPONENT {
            return Err(Error::InvalidInput(format!(
                "tower exponent must lie in 1..={MAX_TOWER_EXPONENT}, got {k}"
            )));
        }
        let bits = 1u64 << k;
        let words = vec![0u64; (bits as usize + 63) / 64];
        Ok(LevelSet { k, words, count: 0 })
    }

    pub fn exponent(&self) -> u32 {
        self.k
    }

    pub fn height(&self) -> u64 {
        1u64 << self.k
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Exact measure `count / 2^k`.
    pub fn measure(&self) -> Rat {
        Rat::new(BigInt::from(self.count), BigInt::one() << self.k as usize)
    }

    pub fn contains(&self, level: u64) -> bool {
        let level = level & (self.height() - 1);
        self.words[(level / 64) as usize] >> (level % 64) & 1 == 1
    }

    pub fn insert(&mut self, level: u64) {
        let level = level & (self.height() - 1);
        let w = &mut self.words[(level / 64) as usize];
        let mask = 1u64 << (level % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.count += 1;
        }
    }

    fn recount(&mut self) {
        self.count = self.words.iter().map(|w| w.count_ones() as u64).sum();
    }

    /// Marks every level whose residue mod 2^j lies in `[0, band_count)`.
    /// This is the lift of the lowest `band_count` levels of the 2^j tower.
    pub fn insert_band(&mut self, j: u32, band_count: u64) -> Result<()> {
        if j == 0 || j > self.k {
            return Err(Error::InvalidInput(format!(
                "band tower exponent {j} must lie in 1..={}",
                self.k
            )));
        }
        if band_count > 1u64 << j {
            return Err(Error::InvalidInput(
                "band count exceeds tower height".to_string(),
            ));
        }
        let period = 1u64 << j;
        if period >= 64 {
            // whole words per period block
            let words_per_period = (period / 64) as usize;
            let full_words = (band_count / 64) as usize;
            let rem_bits = band_count % 64;
            for block in self.words.chunks_mut(words_per_period) {
                for w in block.iter_mut().take(full_words) {
                    *w = u64::MAX;
                }
                if rem_bits > 0 && full_words < block.len() {
                    block[full_words] |= (1u64 << rem_bits) - 1;
                }
            }
        } else {
            // period divides 64: build one repeating word
            let ones = if band_count == 64 {
                u64::MAX
            } else {
                (1u64 << band_count) - 1
            };
            let mut pattern = 0u64;
            let mut shift = 0;
            while shift < 64 {
                pattern |= ones << shift;
                shift += period;
            }
            for w in self.words.iter_mut() {
                *w |= pattern;
            }
        }
        // towers shorter than one word must not keep pattern bits past 2^k
        let tail = self.height() % 64;
        if tail != 0 {
            let last = self.words.last_mut().expect("nonempty");
            *last &= (1u64 << tail) - 1;
        }
        self.recount();
        Ok(())
    }

    pub fn union_with(&mut self, other: &LevelSet) -> Result<()> {
        if self.k != other.k {
            return Err(Error::InvalidInput(
                "level sets live on different towers".to_string(),
            ));
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.recount();
        Ok(())
    }

    pub fn complement(&self) -> LevelSet {
        let words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let mut out = LevelSet {
            k: self.k,
            words,
            count: 0,
        };
        // mask tail bits beyond 2^k (only matters for k < 6)
        let bits = self.height();
        let tail = bits % 64;
        if tail != 0 {
            let last = out.words.last_mut().expect("nonempty");
            *last &= (1u64 << tail) - 1;
        }
        out.recount();
        out
    }

    pub fn iter_levels(&self) -> impl Iterator<Item = u64> + '_ {
        let height = self.height();
        (0..height).filter(move |&l| self.contains(l))
    }

    /// For every level c, the backward hitting distance
    /// `d(c) = min { j >= 1 : (c - j) mod 2^k in self }`, summarized as a
    /// histogram: `hist[d] = #{ c : d(c) = d }` for `d <= max_d`, with
    /// everything farther (or unreachable) in `hist[max_d + 1]`.
    ///
    /// `#{ c : d(c) <= M }` — the exact number of cells covered by
    /// `union_{j=1..M} tau^j(self)` — is then a prefix sum.
    pub fn backward_distance_histogram(&self, max_d: u64) -> Vec<u64> {
        let beyond = (max_d + 1) as usize;
        let mut hist = vec![0u64; beyond + 1];
        let height = self.height();
        if self.count == 0 {
            hist[beyond] = height;
            return hist;
        }
        // last member at or before the starting index
        let mut last_member: Option<u64> = None;
        for c in (0..height).rev() {
            if self.contains(c) {
                last_member = Some(c);
                break;
            }
        }
        let start = last_member.expect("nonempty set") + 1;
        let mut dist = 1u64;
        for step in 0..height {
            let c = (start + step) & (height - 1);
            let d = dist.min(beyond as u64) as usize;
            hist[d] += 1;
            if self.contains(c) {
                dist = 1;
            } else {
                dist += 1;
            }
        }
        hist
    }

    /// Levels at backward distance greater than `m`: the complement of
    /// `union_{j=1..m} tau^j(self)`.
    pub fn levels_beyond_distance(&self, m: u64) -> LevelSet {
        let mut out = LevelSet::empty(self.k).expect("same exponent is valid");
        let height = self.height();
        if self.count == 0 {
            return self.complement(); // nothing is ever swept
        }
        let mut last_member = None;
        for c in (0..height).rev() {
            if self.contains(c) {
                last_member = Some(c);
                break;
            }
        }
        let start = last_member.expect("nonempty") + 1;
        let mut dist = 1u64;
        for step in 0..height {
            let c = (start + step) & (height - 1);
            if dist > m {
                out.insert(c);
            }
            if self.contains(c) {
                dist = 1;
            } else {
                dist += 1;
            }
        }
        out
    }

    /// The set shifted forward k steps: `{ (l + k) mod 2^k : l in self }`,
    /// i.e. the exact level set of `tau^k` applied to this set.
    pub fn shifted(&self, k: u64) -> LevelSet {
        let height = self.height();
        let k = k & (height - 1);
        let mut out = LevelSet::empty(self.k).expect("same exponent");
        if height < 64 {
            for l in self.iter_levels() {
                out.insert((l + k) & (height - 1));
            }
            out.count = self.count;
            return out;
        }
        let word_shift = (k / 64) as usize;
        let bit_shift = (k % 64) as u32;
        let n = self.words.len();
        for (i, &w) in self.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let lo_idx = (i + word_shift) % n;
            if bit_shift == 0 {
                out.words[lo_idx] |= w;
            } else {
                out.words[lo_idx] |= w << bit_shift;
                out.words[(lo_idx + 1) % n] |= w >> (64 - bit_shift);
            }
        }
        out.count = self.count;
        out
    }

    /// Size of the intersection with another set on the same tower.
    pub fn intersect_count(&self, other: &LevelSet) -> Result<u64> {
        if self.k != other.k {
            return Err(Error::InvalidInput(
                "level sets live on different towers".to_string(),
            ));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    /// True when the sets share no level.
    pub fn is_disjoint_from(&self, other: &LevelSet) -> Result<bool> {
        Ok(self.intersect_count(other)? == 0)
    }

    /// The point set: cells are bit-reversed levels, merged into arcs.
    /// Intended for moderate sets; cost is O(count log count).
    pub fn to_arcset(&self) -> ArcSet {
        let mut cells: Vec<u64> = self.iter_levels().map(|l| reverse_bits_k(l, self.k)).collect();
        cells.sort_unstable();
        let width = pow2(-(self.k as i64));
        let denom = BigInt::one() << self.k as usize;
        let mut arcs = Vec::new();
        let mut run_start: Option<(u64, u64)> = None;
        for &c in &cells {
            run_start = match run_start {
                None => Some((c, c)),
                Some((s, e)) if c == e + 1 => Some((s, c)),
                Some((s, e)) => {
                    arcs.push(make_cell_arc(s, e, &denom, &width));
                    Some((c, c))
                }
            };
        }
        if let Some((s, e)) = run_start {
            arcs.push(make_cell_arc(s, e, &denom, &width));
        }
        ArcSet::normalize(arcs)
    }

    /// Rasterizes an arc set whose endpoints are dyadic with denominator
    /// dividing 2^k. Errors if any endpoint is finer than the tower.
    pub fn from_arcset(s: &ArcSet, k: u32) -> Result<Self> {
        let mut out = LevelSet::empty(k)?;
        let scale = Rat::from_integer(BigInt::one() << k as usize);
        for (lo, hi) in s.to_segments() {
            let lo_scaled = lo * &scale;
            let hi_scaled = hi * &scale;
            if !lo_scaled.is_integer() || !hi_scaled.is_integer() {
                return Err(Error::InvalidInput(format!(
                    "arc endpoints are not multiples of 2^-{k}"
                )));
            }
            let lo_cell = u64::try_from(lo_scaled.to_integer()).map_err(|_| {
                Error::InvalidInput("arc endpoint out of range".to_string())
            })?;
            let hi_cell = u64::try_from(hi_scaled.to_integer()).map_err(|_| {
                Error::InvalidInput("arc endpoint out of range".to_string())
            })?;
            for cell in lo_cell..hi_cell {
                out.insert(reverse_bits_k(cell, k));
            }
        }
        Ok(out)
    }
}

fn make_cell_arc(first_cell: u64, last_cell: u64, denom: &BigInt, width: &Rat) -> Arc {
    let start = Rat::new(BigInt::from(first_cell), denom.clone());
    let length = width * Rat::from_integer(BigInt::from(last_cell - first_cell + 1));
    Arc::new(CirclePoint::new(start), length).expect("cell arcs are valid")
}

/// The lowest `band_count` levels of the 2^j tower as an arc set
/// (`band_count` cells of width 2^-j, before merging).
pub fn band_to_arcset(j: u32, band_count: u64) -> Result<ArcSet> {
    if j == 0 || j > MAX_TOWER_EXPONENT {
        return Err(Error::InvalidInput(format!(
            "tower exponent must lie in 1..={MAX_TOWER_EXPONENT}, got {j}"
        )));
    }
    if band_count > 1u64 << j {
        return Err(Error::InvalidInput(
            "band count exceeds tower height".to_string(),
        ));
    }
    let width = pow2(-(j as i64));
    let denom = BigInt::one() << j as usize;
    let mut cells: Vec<u64> = (0..band_count).map(|l| reverse_bits_k(l, j)).collect();
    cells.sort_unstable();
    let arcs = cells
        .iter()
        .map(|&c| {
            Arc::new(
                CirclePoint::new(Rat::new(BigInt::from(c), denom.clone())),
                width.clone(),
            )
            .expect("cell width valid")
        })
        .collect();
    Ok(ArcSet::normalize(arcs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapSpec;
    use crate::rat::rat;

    #[test]
    fn bit_reversal() {
        assert_eq!(reverse_bits_k(0b001, 3), 0b100);
        assert_eq!(reverse_bits_k(0b110, 3), 0b011);
        assert_eq!(reverse_bits_k(1, 1), 1);
        for i in 0..32 {
            assert_eq!(reverse_bits_k(reverse_bits_k(i, 5), 5), i);
        }
    }

    #[test]
    fn band_matches_tower_levels() {
        // the lowest L levels of the tower, via arcs and via the band helper
        let tower = crate::maps::odometer_tower(4).unwrap();
        for l in [1u64, 3, 8, 16] {
            let from_tower = ArcSet::normalize(
                tower.levels()[..l as usize].to_vec(),
            );
            assert_eq!(band_to_arcset(4, l).unwrap(), from_tower);
        }
    }

    #[test]
    fn band_lift_preserves_measure() {
        let mut s = LevelSet::empty(8).unwrap();
        s.insert_band(3, 5).unwrap(); // 5/8 of the circle
        assert_eq!(s.measure(), rat(5, 8));
        // lifted band equals the rasterized arc set
        let arcs = band_to_arcset(3, 5).unwrap();
        let raster = LevelSet::from_arcset(&arcs, 8).unwrap();
        assert_eq!(s, raster);
    }

    #[test]
    fn shift_matches_odometer_image() {
        // tau^j of a level set, computed by index shift, equals the exact
        // arc-set image under the odometer
        let m = MapSpec::Odometer;
        let k = 5u32;
        let mut s = LevelSet::empty(k).unwrap();
        for level in [0u64, 1, 7, 12, 30] {
            s.insert(level);
        }
        let mut arcs = s.to_arcset();
        let mut shifted = s.clone();
        for _ in 0..9 {
            arcs = m.image_set(&arcs).unwrap();
            let mut next = LevelSet::empty(k).unwrap();
            for level in shifted.iter_levels() {
                next.insert((level + 1) % (1 << k));
            }
            shifted = next;
            assert_eq!(shifted.to_arcset(), arcs);
        }
    }

    #[test]
    fn histogram_counts_sweep_measures() {
        // E = {0, 5} in a 2^3 tower: distances d(c) check by hand
        let mut e = LevelSet::empty(3).unwrap();
        e.insert(0);
        e.insert(5);
        let hist = e.backward_distance_histogram(8);
        // members at 0 and 5: forward distances: c=1..5 have d=1..5? walk:
        // d(1)=1, d(2)=2, d(3)=3, d(4)=4, d(5)=5, d(6)=1, d(7)=2, d(0)=3
        assert_eq!(hist[1], 2);
        assert_eq!(hist[2], 2);
        assert_eq!(hist[3], 2);
        assert_eq!(hist[4], 1);
        assert_eq!(hist[5], 1);
        assert_eq!(hist.iter().sum::<u64>(), 8);

        // covered-by-M counts agree with brute force over shifts
        for m in 1..=8u64 {
            let brute: u64 = (0..8u64)
                .filter(|&c| (1..=m).any(|j| e.contains((c + 8 - (j % 8)) % 8)))
                .count() as u64;
            let prefix: u64 = hist[1..=(m as usize).min(8)].iter().sum();
            assert_eq!(prefix, brute, "M = {m}");
            let beyond = e.levels_beyond_distance(m);
            assert_eq!(beyond.count(), 8 - brute);
        }
    }

    #[test]
    fn shifted_matches_pointwise() {
        for k in [3u32, 7, 8] {
            let mut s = LevelSet::empty(k).unwrap();
            for l in [0u64, 1, 5, (1 << k) - 1] {
                s.insert(l);
            }
            for shift in [1u64, 63, 64, 65, (1 << k) - 1] {
                let fast = s.shifted(shift);
                let mut slow = LevelSet::empty(k).unwrap();
                for l in s.iter_levels() {
                    slow.insert((l + shift) % (1 << k));
                }
                assert_eq!(fast, slow, "k={k} shift={shift}");
            }
        }
    }

    #[test]
    fn intersection_counts() {
        let mut a = LevelSet::empty(7).unwrap();
        let mut b = LevelSet::empty(7).unwrap();
        for l in 0..40u64 {
            a.insert(l);
        }
        for l in 30..60u64 {
            b.insert(l);
        }
        assert_eq!(a.intersect_count(&b).unwrap(), 10);
        assert!(!a.is_disjoint_from(&b).unwrap());
        assert!(a.is_disjoint_from(&a.complement()).unwrap());
    }

    #[test]
    fn empty_set_sweeps_nothing() {
        let e = LevelSet::empty(4).unwrap();
        let hist = e.backward_distance_histogram(10);
        assert_eq!(hist[11], 16);
        assert_eq!(hist[..11].iter().sum::<u64>(), 0);
        assert_eq!(e.levels_beyond_distance(5).count(), 16);
    }

    #[test]
    fn complement_partitions() {
        let mut s = LevelSet::empty(6).unwrap();
        s.insert_band(2, 3).unwrap();
        let c = s.complement();
        assert_eq!(s.count() + c.count(), 64);
        assert!(s.iter_levels().all(|l| !c.contains(l)));
        assert_eq!(
            s.to_arcset().union(&c.to_arcset()),
            ArcSet::full()
        );
    }
}
