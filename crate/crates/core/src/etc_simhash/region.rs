//! Conditional means over sign-pattern polytopes by rejection sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hashing::{dot, Separators, SignPattern};
use crate::env::KnownDistribution;
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const DEFAULT_REGION_SAMPLES: usize = 50_000;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 200;
/// Below this many accepted draws an estimate carries a low-mass warning.
pub const LOW_MASS_ACCEPTED: usize = 50;

/// One affine constraint: the region keeps `x` iff
/// `(normal · x + offset >= 0) == keep_nonnegative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub keep_nonnegative: bool,
}

/// Intersection of halfspaces with the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeRegion {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

impl PolytopeRegion {
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("region", "dimension must be at least 1"));
        }
        if halfspaces.iter().any(|h| h.normal.len() != dim) {
            return Err(Error::invalid("region", "halfspace dimension mismatch"));
        }
        Ok(PolytopeRegion { dim, halfspaces })
    }

    pub fn whole_box(dim: usize) -> Self {
        PolytopeRegion {
            dim,
            halfspaces: Vec::new(),
        }
    }

    /// Preimage of `pattern` under `sep`, within the box.
    pub fn from_pattern(sep: &Separators, pattern: &SignPattern) -> Self {
        PolytopeRegion {
            dim: sep.dim(),
            halfspaces: sep
                .rows()
                .iter()
                .zip(&pattern.0)
                .map(|(w, &bit)| Halfspace {
                    normal: w.clone(),
                    offset: 0.0,
                    keep_nonnegative: bit,
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|c| (0.0..=1.0).contains(c))
            && self
                .halfspaces
                .iter()
                .all(|h| (dot(&h.normal, x) + h.offset >= 0.0) == h.keep_nonnegative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub accepted: usize,
    pub draws: usize,
    /// Fewer than [`LOW_MASS_ACCEPTED`] draws landed in the region.
    pub low_mass: bool,
    /// Sample variance of `v*` over accepted draws; a rough spread check.
    pub value_variance: f64,
}

impl RegionEstimate {
    pub fn mass(&self) -> f64 {
        self.accepted as f64 / self.draws as f64
    }
}

/// Monte-Carlo estimate of `E[v*(x) | x ∈ region]` under the known density.
///
/// The standard error is a bootstrap over accepted draws; with
/// `bootstrap_reps == 0` the plain `s / sqrt(k)` is reported instead.
pub fn estimate_region_mean(
    known: &KnownDistribution,
    region: &PolytopeRegion,
    n_samples: usize,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<RegionEstimate> {
    if region.dim() != known.dim {
        return Err(Error::invalid("region", "dimension differs from the distribution"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let mut rng = rng_from(seed);
    let mut x = vec![0.0; known.dim];
    let mut values = Vec::new();
    for _ in 0..n_samples {
        known.sample_into(&mut rng, &mut x);
        if region.contains(&x) {
            values.push(known.value(&x));
        }
    }
    let k = values.len();
    if k == 0 {
        return Err(Error::NoMass(format!("region hit 0 of {n_samples} draws")));
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let variance = if k > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64
    } else {
        0.0
    };
    let std_error = if bootstrap_reps == 0 || k == 1 {
        (variance / k as f64).sqrt()
    } else {
        let means: Vec<f64> = (0..bootstrap_reps)
            .map(|_| (0..k).map(|_| values[rng.random_range(0..k)]).sum::<f64>() / k as f64)
            .collect();
        let m = means.iter().sum::<f64>() / bootstrap_reps as f64;
        (means.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (bootstrap_reps - 1).max(1) as f64).sqrt()
    };
    Ok(RegionEstimate {
        estimate: mean,
        std_error,
        accepted: k,
        draws: n_samples,
        low_mass: k < LOW_MASS_ACCEPTED,
        value_variance: variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Density, Valuation};

    fn first_coordinate() -> KnownDistribution {
        KnownDistribution::new(
            2,
            Density::Uniform,
            Valuation::Linear {
                weights: vec![1.0, 0.0],
                bias: 0.0,
            },
            1.0,
        )
        .unwrap()
    }

    fn upper_triangle() -> PolytopeRegion {
        PolytopeRegion::new(
            2,
            vec![Halfspace {
                normal: vec![1.0, 1.0],
                offset: -1.0,
                keep_nonnegative: true,
            }],
        )
        .unwrap()
    }

    #[test]
    fn whole_box_mean() {
        let e = estimate_region_mean(&first_coordinate(), &PolytopeRegion::whole_box(2), 20_000, 200, 1)
            .unwrap();
        assert!((e.estimate - 0.5).abs() <= 3.0 * e.std_error, "{e:?}");
        assert_eq!(e.accepted, 20_000);
    }

    #[test]
    fn triangle_centroid() {
        let e = estimate_region_mean(&first_coordinate(), &upper_triangle(), 20_000, 200, 2).unwrap();
        assert!((e.estimate - 2.0 / 3.0).abs() <= 3.0 * e.std_error, "{e:?}");
        assert!((e.mass() - 0.5).abs() < 0.02);
    }

    #[test]
    fn bootstrap_close_to_plain_error() {
        let known = first_coordinate();
        let boot = estimate_region_mean(&known, &upper_triangle(), 20_000, 400, 3).unwrap();
        let plain = estimate_region_mean(&known, &upper_triangle(), 20_000, 0, 3).unwrap();
        assert_eq!(boot.estimate, plain.estimate);
        assert!((boot.std_error / plain.std_error - 1.0).abs() < 0.15);
    }

    #[test]
    fn tiny_region_warns() {
        // Corner square of area 0.001.
        let side = 0.001f64.sqrt();
        let region = PolytopeRegion::new(
            2,
            vec![
                Halfspace {
                    normal: vec![1.0, 0.0],
                    offset: -(1.0 - side),
                    keep_nonnegative: true,
                },
                Halfspace {
                    normal: vec![0.0, 1.0],
                    offset: -(1.0 - side),
                    keep_nonnegative: true,
                },
            ],
        )
        .unwrap();
        match estimate_region_mean(&first_coordinate(), &region, 1000, 50, 5) {
            Ok(e) => assert!(e.low_mass),
            Err(Error::NoMass(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn empty_region_is_no_mass() {
        let region = PolytopeRegion::new(
            2,
            vec![Halfspace {
                normal: vec![1.0, 1.0],
                offset: -3.0,
                keep_nonnegative: true,
            }],
        )
        .unwrap();
        assert!(matches!(
            estimate_region_mean(&first_coordinate(), &region, 1000, 0, 0),
            Err(Error::NoMass(_))
        ));
    }
}
