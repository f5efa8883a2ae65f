//! Exact dynamics on the circle `[0, 1)` with shrinking-target machinery.
//!
//! Everything measurable is a finite union of half-open arcs with rational
//! endpoints, and every map (rotation by a continued-fraction convergent,
//! doubling, the dyadic odometer, interval exchanges) acts on those arcs
//! exactly. On top of that sit hit-time statistics, covering-radius
//! profiles, certified constructions of visible and invisible target
//! sequences, and seeded random-covering experiments.
//!
//! No floating point enters any certified quantity; the few places that
//! need transcendental values (log-family rates, the Shepp criterion sums)
//! go through an explicit fixed-point layer with documented precision.

pub mod arcs;
pub mod construct;
pub mod covering;
pub mod dyadic;
pub mod error;
pub mod hp;
pub mod maps;
pub mod randcover;
pub mod rat;
pub mod rates;
pub mod sampling;
pub mod targets;

pub use arcs::{circular_gaps, Arc, ArcSet, CirclePoint};
pub use error::Error;
pub use maps::{MapSpec, RotationAngle, Tower};
pub use rat::Rat;
pub use rates::RateSeq;
pub use targets::{HitRecord, TargetSeq};

pub type Result<T> = std::result::Result<T, Error>;
