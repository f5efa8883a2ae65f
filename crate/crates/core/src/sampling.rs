//! Deterministic initial-point samples. No hidden randomness: everything
//! is a pure function of the seed, and experiment configs carry the seed.

use num_bigint::BigInt;

use crate::arcs::CirclePoint;
use crate::rat::Rat;

/// SplitMix64: the standard finalizer, used to derive independent child
/// seeds (per trial, per sample) from one master seed.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How sampled rationals are shaped.
///
/// Dyadic points are uniform on the 2^-64 grid, which suits rotations and
/// the odometer. Orbits of the doubling map shift binary digits, so dyadic
/// starting points collapse to 0 within 64 steps; `Odd64` draws a random
/// odd denominator (whose multiplicative order mod 2 is astronomically
/// large for random 64-bit values) so doubling orbits stay faithful.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DenomKind {
    Dyadic64,
    Odd64,
}

/// `count` seeded points, derived independently via `split_seed`.
pub fn seeded_points(seed: u64, count: u64, denom: DenomKind) -> Vec<CirclePoint> {
    (0..count)
        .map(|i| match denom {
            DenomKind::Dyadic64 => {
                let u = split_seed(seed, 2 * i);
                CirclePoint::new(crate::rat::from_u64_over_2_64(u))
            }
            DenomKind::Odd64 => {
                let q = split_seed(seed, 2 * i) | 1;
                let r = split_seed(seed, 2 * i + 1);
                // p = floor(r * q / 2^64), uniform over 0..q up to 2^-64 bias
                let p = ((r as u128 * q as u128) >> 64) as u64;
                CirclePoint::new(Rat::new(BigInt::from(p), BigInt::from(q)))
            }
        })
        .collect()
}

/// The uniform grid i/count, i = 0..count.
pub fn grid_points(count: u64) -> Vec<CirclePoint> {
    (0..count)
        .map(|i| CirclePoint::new(Rat::new(BigInt::from(i), BigInt::from(count))))
        .collect()
}
