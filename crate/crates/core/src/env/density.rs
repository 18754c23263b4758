//! Item densities over the unit box and concave valuation families.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StatNormal};

use crate::error::{Error, Result};

/// Item density on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Uniform,
    /// Product of per-coordinate normals truncated to `[0,1]`.
    TruncatedGaussian { mean: Vec<f64>, std: Vec<f64> },
}

// Each truncated coordinate must keep at least this much of its normal mass
// inside [0,1], otherwise rejection sampling stalls.
const MIN_COORDINATE_MASS: f64 = 1e-3;

impl Density {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Density::Uniform => Ok(()),
            Density::TruncatedGaussian { mean, std } => {
                if mean.len() != dim || std.len() != dim {
                    return Err(Error::invalid(
                        "density",
                        format!("mean/std must have {dim} entries"),
                    ));
                }
                for (&m, &s) in mean.iter().zip(std) {
                    if !m.is_finite() || !(s.is_finite() && s > 0.0) {
                        return Err(Error::invalid("density", "mean finite, std positive"));
                    }
                    if coordinate_mass(m, s) < MIN_COORDINATE_MASS {
                        return Err(Error::invalid(
                            "density",
                            format!("N({m}, {s}) has almost no mass on [0,1]"),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Fills `out` with one draw.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Density::Uniform => out.iter_mut().for_each(|x| *x = rng.random::<f64>()),
            Density::TruncatedGaussian { mean, std } => {
                // Coordinates are independent, so per-coordinate rejection is
                // the same as rejecting whole vectors.
                for ((x, &m), &s) in out.iter_mut().zip(mean).zip(std) {
                    let normal = Normal::new(m, s).expect("validated");
                    *x = loop {
                        let z = normal.sample(rng);
                        if (0.0..=1.0).contains(&z) {
                            break z;
                        }
                    };
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; dim];
        self.sample_into(rng, &mut x);
        x
    }

    /// Normalized density at `x`; zero outside the box.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return 0.0;
        }
        match self {
            Density::Uniform => 1.0,
            Density::TruncatedGaussian { mean, std } => x
                .iter()
                .zip(mean)
                .zip(std)
                .map(|((&xi, &m), &s)| {
                    let n = StatNormal::new(m, s).expect("validated");
                    n.pdf(xi) / coordinate_mass(m, s)
                })
                .product(),
        }
    }
}

fn coordinate_mass(mean: f64, std: f64) -> f64 {
    let n = StatNormal::new(mean, std).expect("positive std");
    n.cdf(1.0) - n.cdf(0.0)
}

/// Buyer valuation `v*(x) = min(H, w.x + b)`, nonnegative on the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Valuation {
    Linear { weights: Vec<f64>, bias: f64 },
    /// Average of the coordinates.
    MeanCoordinate,
}

impl Valuation {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Valuation::Linear { weights, bias } = self {
            if weights.len() != dim {
                return Err(Error::invalid(
                    "valuation",
                    format!("expected {dim} weights, got {}", weights.len()),
                ));
            }
            if weights.iter().chain([bias]).any(|w| !w.is_finite()) {
                return Err(Error::invalid("valuation", "non-finite coefficient"));
            }
            let min_on_box = bias + weights.iter().map(|w| w.min(0.0)).sum::<f64>();
            if min_on_box < 0.0 {
                return Err(Error::invalid(
                    "valuation",
                    format!("negative on the unit box (minimum {min_on_box})"),
                ));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64], cap: f64) -> f64 {
        let raw = match self {
            Valuation::Linear { weights, bias } => {
                bias + weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
            }
            Valuation::MeanCoordinate => x.iter().sum::<f64>() / x.len() as f64,
        };
        raw.clamp(0.0, cap)
    }
}
