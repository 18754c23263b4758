//! Threshold grid built from the initialization phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-index sorted thresholds `V_i = {0 = p_{i,0} < ... < p_{i,m_i}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGrid {
    thresholds: Vec<Vec<f64>>,
    log_grid_size: f64,
}

/// `V_i = {0} ∪ {prices seen with mask i}`, sorted and deduplicated.
pub fn build_policy_grid(observations: &[(usize, f64)], n: usize) -> Result<PolicyGrid> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one mask index"));
    }
    let mut thresholds = vec![vec![0.0]; n];
    for &(i, p) in observations {
        if i >= n {
            return Err(Error::invalid("mask", format!("index {i} outside 0..{n}")));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::invalid("price", format!("{p} is not a nonnegative price")));
        }
        thresholds[i].push(p);
    }
    for v in &mut thresholds {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    Ok(PolicyGrid::from_thresholds(thresholds))
}

impl PolicyGrid {
    fn from_thresholds(thresholds: Vec<Vec<f64>>) -> Self {
        let log_grid_size = thresholds.iter().map(|v| (v.len() as f64).ln()).sum();
        PolicyGrid {
            thresholds,
            log_grid_size,
        }
    }

    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self, i: usize) -> &[f64] {
        &self.thresholds[i]
    }

    /// `m_i`: number of nonzero thresholds of index `i`.
    pub fn m(&self, i: usize) -> usize {
        self.thresholds[i].len() - 1
    }

    pub fn max_m(&self) -> usize {
        (0..self.n()).map(|i| self.m(i)).max().unwrap_or(0)
    }

    /// `ln |V|`.
    pub fn log_grid_size(&self) -> f64 {
        self.log_grid_size
    }

    /// `|V|`, if it fits in a `usize`.
    pub fn size(&self) -> Option<usize> {
        self.thresholds
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.len()))
    }

    /// Bucket cells of index `i`: `0..=m_i` plus the padded cell `(p_{i,m_i}, H]`.
    pub fn cells(&self, i: usize) -> usize {
        self.thresholds[i].len() + 1
    }

    /// `j = 0` at `p = 0`, otherwise the `j` with `p ∈ (p_{i,j-1}, p_{i,j}]`;
    /// prices above every threshold land in cell `m_i + 1`.
    pub fn locate_bucket(&self, i: usize, p: f64) -> usize {
        self.thresholds[i].partition_point(|&x| x < p)
    }
}
