//! SimHash masks: sign patterns of linear projections.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::MaskValue;

/// Rows `w_1..w_l` of a SimHash mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separators {
    rows: Vec<Vec<f64>>,
}

const MAX_SEPARATOR_ATTEMPTS: usize = 100;

impl Separators {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 {
            return Err(Error::invalid("separators", "need at least one non-empty row"));
        }
        for row in &rows {
            if row.len() != dim {
                return Err(Error::invalid("separators", "rows differ in dimension"));
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::invalid("separators", "non-finite entry"));
            }
            if row.iter().all(|&w| w == 0.0) {
                return Err(Error::invalid("separators", "zero row"));
            }
        }
        Ok(Separators { rows })
    }

    /// Draws `bits` unit-norm rows whose hyperplanes cut the open box.
    ///
    /// A hyperplane through the origin meets the interior of `[0,1]^d` iff its
    /// normal has both a positive and a negative entry, so single-sign draws
    /// are redrawn.
    pub fn random<R: Rng + ?Sized>(dim: usize, bits: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 || bits == 0 {
            return Err(Error::invalid("separators", "d and l must be at least 1"));
        }
        let mut rows = Vec::with_capacity(bits);
        for j in 0..bits {
            let row = (0..MAX_SEPARATOR_ATTEMPTS)
                .map(|_| {
                    let w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    w.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
                })
                .find(|w| w.iter().any(|&v| v > 0.0) && w.iter().any(|&v| v < 0.0))
                .ok_or_else(|| {
                    Error::invalid(
                        "separators",
                        format!("row {j}: no hyperplane crossing the box after {MAX_SEPARATOR_ATTEMPTS} draws"),
                    )
                })?;
            rows.push(row);
        }
        Ok(Separators { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn bits(&self) -> usize {
        self.rows.len()
    }
}

/// A length-`l` SimHash output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignPattern(pub Vec<bool>);

impl SignPattern {
    /// Pattern index with bit `j` worth `2^j`.
    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &b)| acc | (usize::from(b) << j))
    }

    pub fn from_index(index: usize, bits: usize) -> Self {
        SignPattern((0..bits).map(|j| (index >> j) & 1 == 1).collect())
    }

    pub fn from_mask(mask: &MaskValue, bits: usize) -> Result<Self> {
        match mask {
            MaskValue::Bits(b) if b.len() == bits => Ok(SignPattern(b.clone())),
            MaskValue::Bits(b) => Err(Error::invalid(
                "mask",
                format!("expected {bits} bits, got {}", b.len()),
            )),
            MaskValue::Index(i) if *i < 1 << bits => Ok(SignPattern::from_index(*i, bits)),
            MaskValue::Index(i) => Err(Error::invalid("mask", format!("index {i} out of range"))),
        }
    }

    pub fn to_mask(&self) -> MaskValue {
        MaskValue::Bits(self.0.clone())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bit `j` is set iff `w_j . x >= 0`.
pub fn simhash(sep: &Separators, x: &[f64]) -> Result<SignPattern> {
    if x.len() != sep.dim() {
        return Err(Error::invalid(
            "x",
            format!("dimension {} does not match separators ({})", x.len(), sep.dim()),
        ));
    }
    Ok(simhash_unchecked(sep, x))
}

pub(crate) fn simhash_unchecked(sep: &Separators, x: &[f64]) -> SignPattern {
    SignPattern(sep.rows.iter().map(|w| dot(w, x) >= 0.0).collect())
}
