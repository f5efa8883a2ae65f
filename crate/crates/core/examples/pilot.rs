// Scratch pilot runs for freezing acceptance thresholds. Not shipped.

use circle_targets::covering::{covering_profile, rate_report};
use circle_targets::maps::{MapSpec, RotationAngle};
use circle_targets::randcover::{coverage_probability, LengthFamily};
use circle_targets::rat::{rat, to_f64, Rat};
use circle_targets::rates::RateSeq;
use circle_targets::sampling::{seeded_points, DenomKind};
use circle_targets::targets::{expected_hits, hits, scaled_distance_min, TargetSeq};
use circle_targets::CirclePoint;
use num_bigint::BigInt;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();

    // --- golden rotation, q >= N^2 = 1e8
    let n_horizon = 10_000u64;
    let min_q = BigInt::from(n_horizon) * BigInt::from(n_horizon);
    let angle = RotationAngle::extended_to_denominator(&[1], &min_q).unwrap();
    println!(
        "golden: depth = {}, q = {} ({:.3e})",
        angle.depth(),
        angle.denominator(),
        to_f64(&Rat::from_integer(angle.denominator().clone()))
    );
    let map = MapSpec::Rotation(angle);
    let x0 = CirclePoint::zero();
    let profile = covering_profile(&map, &x0, n_horizon).unwrap();
    let report = rate_report(&profile, 100).unwrap();
    println!(
        "golden profile: sup n*r_n over [100, 1e4] = {} at n = {} ({} s)",
        report.sup_scaled_decimal,
        report.argmax,
        t0.elapsed().as_secs_f64()
    );
    assert!(!profile.periodic_detected);

    // --- Liouville-flavored quotients
    let t1 = Instant::now();
    let liouville = MapSpec::rotation_from_quotients(&[
        1, 10, 100, 1000, 10_000, 100_000, 1_000_000, 10_000_000,
    ])
    .unwrap();
    let lp = covering_profile(&liouville, &x0, 100_000).unwrap();
    let lrep = rate_report(&lp, 100).unwrap();
    println!(
        "liouville: sup n*r_n over [100, 1e5] = {} at n = {} ({} s)",
        lrep.sup_scaled_decimal,
        lrep.argmax,
        t1.elapsed().as_secs_f64()
    );

    // --- Boshernitzan statistic
    let t2 = Instant::now();
    let (v, argmin) = scaled_distance_min(&map, &x0, &x0, n_horizon).unwrap();
    println!(
        "boshernitzan x=0: min n*d = {:.6} at n = {} ({} s)",
        to_f64(&v),
        argmin,
        t2.elapsed().as_secs_f64()
    );
    for seed in [1u64, 2] {
        for x in seeded_points(seed, 5, DenomKind::Dyadic64) {
            let (v, _) = scaled_distance_min(&map, &x, &x, n_horizon).unwrap();
            assert!(to_f64(&v) <= 1.0);
        }
    }
    println!("boshernitzan sampled points all <= 1");

    // --- Borel-Cantelli invisibility: doubling, B_n = [0, 1/n^2) floored
    let t3 = Instant::now();
    let rates = RateSeq::dyadic_floor(RateSeq::COverNPow {
        c: rat(1, 1),
        alpha: rat(2, 1),
    });
    let n_bc = 10_000u64;
    let expected = expected_hits(&rates, n_bc).unwrap();
    let table = circle_targets::construct::dyadic_ball_table(&rates, n_bc).unwrap();
    let targets = TargetSeq::AbstractSets { table };
    let sample = seeded_points(2024, 200, DenomKind::Odd64);
    let mut total_hits = 0u64;
    let mut last_hit = 0u64;
    for x in &sample {
        let record = hits(&MapSpec::Doubling, x, &targets, n_bc).unwrap();
        total_hits += record.count;
        if let Some(&t) = record.times.last() {
            last_hit = last_hit.max(t);
        }
    }
    let mean = total_hits as f64 / sample.len() as f64;
    println!(
        "borel-cantelli: expected = {:.4}, mean = {:.4}, last hit at n = {} ({} s)",
        to_f64(&expected),
        mean,
        last_hit,
        t3.elapsed().as_secs_f64()
    );

    // --- Shepp coupled estimates
    let t4 = Instant::now();
    for c in [rat(1, 2), rat(2, 1)] {
        let est = coverage_probability(42, &LengthFamily::COverN { c: c.clone() }, 10_000, 400)
            .unwrap();
        println!(
            "shepp c = {}: covered {}/400, wilson = ({:.4}, {:.4}) ({} s)",
            circle_targets::rat::format_ratio(&c),
            est.covered_count,
            est.wilson_95.0,
            est.wilson_95.1,
            t4.elapsed().as_secs_f64()
        );
    }

    println!("total pilot time: {} s", t0.elapsed().as_secs_f64());
}
