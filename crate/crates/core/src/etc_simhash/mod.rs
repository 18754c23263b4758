//! Explore-then-commit under a known item distribution and a SimHash mask:
//! learn the separators by LP, then buy iff the conditional mean of the
//! observed pattern's region is at least the price.

pub mod doubling;
pub mod hashing;
pub mod recovery;
pub mod region;
pub mod strategy;

pub use doubling::{doubling_runner, epoch_lengths, Doubling, StrategyFactory};
pub use hashing::{simhash, Separators, SignPattern};
pub use recovery::recover_separators;
pub use region::{estimate_region_mean, Halfspace, PolytopeRegion, RegionEstimate};
pub use strategy::{exploration_length, EtcSimHash, EtcSimHashConfig, PatternEstimate};

/// `(l/t') (d ln(2e t'/d) + ln(2l/δ))`: disagreement bound for separators
/// learned from `t'` points.
pub fn disagreement_bound(t_prime: usize, dim: usize, bits: usize, delta: f64) -> f64 {
    let (t, d, l) = (t_prime as f64, dim as f64, bits as f64);
    l / t * (d * (2.0 * std::f64::consts::E * t / d).ln() + (2.0 * l / delta).ln())
}
