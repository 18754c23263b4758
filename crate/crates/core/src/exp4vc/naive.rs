//! Reference implementation enumerating every grid policy with an explicit
//! weight. Exponential in `n`; only for checking the bucketized path.

use super::buckets::MixtureProbs;
use super::grid::PolicyGrid;
use crate::error::{Error, Result};

pub const MAX_NAIVE_POLICIES: usize = 1_000_000;

/// Explicit per-policy log weights over `V = ×V_i`.
#[derive(Debug, Clone)]
pub struct NaiveWeights {
    /// Threshold values of each policy, one row per policy.
    policies: Vec<Vec<f64>>,
    /// Threshold indices of each policy.
    indices: Vec<Vec<usize>>,
    log_w: Vec<f64>,
}

impl NaiveWeights {
    pub fn new(grid: &PolicyGrid) -> Result<Self> {
        let size = grid
            .size()
            .filter(|&s| s <= MAX_NAIVE_POLICIES)
            .ok_or_else(|| Error::invalid("grid", "too many policies to enumerate"))?;
        let mut indices = Vec::with_capacity(size);
        let mut current = vec![0usize; grid.n()];
        loop {
            indices.push(current.clone());
            // Odometer increment.
            let mut i = 0;
            loop {
                if i == grid.n() {
                    let policies = indices
                        .iter()
                        .map(|ks| ks.iter().enumerate().map(|(i, &k)| grid.thresholds(i)[k]).collect())
                        .collect();
                    return Ok(NaiveWeights {
                        policies,
                        indices,
                        log_w: vec![0.0; size],
                    });
                }
                current[i] += 1;
                if current[i] <= grid.m(i) {
                    break;
                }
                current[i] = 0;
                i += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn policy_indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Advice of policy `v` at context `(i, p)`: buy iff `v[i] >= p`.
    fn advice(&self, v: usize, i: usize, p: f64) -> usize {
        usize::from(self.policies[v][i] >= p)
    }

    /// `ξ̄` by direct summation over policies.
    pub fn mixture_probs(&self, i: usize, p: f64, gamma: f64) -> MixtureProbs {
        let max = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut buying = 0.0;
        for (v, &lw) in self.log_w.iter().enumerate() {
            let w = (lw - max).exp();
            total += w;
            if self.advice(v, i, p) == 1 {
                buying += w;
            }
        }
        let share1 = buying / total;
        let share0 = (total - buying) / total;
        MixtureProbs {
            xi_bar: [
                (1.0 - 2.0 * gamma) * share0 + gamma,
                (1.0 - 2.0 * gamma) * share1 + gamma,
            ],
        }
    }

    /// `w^v <- w^v exp(C^v)` with
    /// `C^v = γ/2 (ξ^v·r̂ + Σ_b ξ^v[b] / ξ̄[b] · bonus)`.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        i: usize,
        p: f64,
        arm: usize,
        reward: f64,
        probs: &MixtureProbs,
        gamma: f64,
        bonus: f64,
    ) {
        let mut r_hat = [0.0; 2];
        r_hat[arm] = reward / probs.xi_bar[arm];
        for v in 0..self.log_w.len() {
            let buy = self.advice(v, i, p);
            let advice = [1 - buy, buy].map(|a| a as f64);
            let dot = advice[0] * r_hat[0] + advice[1] * r_hat[1];
            let explore = advice[0] / probs.xi_bar[0] + advice[1] / probs.xi_bar[1];
            self.log_w[v] += gamma / 2.0 * (dot + explore * bonus);
        }
    }
}

/// Free-function form of [`NaiveWeights::mixture_probs`].
pub fn naive_mixture_probs(weights: &NaiveWeights, i: usize, p: f64, gamma: f64) -> MixtureProbs {
    weights.mixture_probs(i, p, gamma)
}

#[cfg(test)]
mod tests {
    use super::super::grid::build_policy_grid;
    use super::*;

    #[test]
    fn enumerates_product_grid() {
        let grid = build_policy_grid(&[(0, 0.3), (0, 0.7), (1, 0.5)], 2).unwrap();
        let naive = NaiveWeights::new(&grid).unwrap();
        assert_eq!(naive.len(), 6);
        let mut seen = naive.policy_indices().to_vec();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn single_policy_buys_only_at_zero() {
        let grid = build_policy_grid(&[], 3).unwrap();
        let naive = NaiveWeights::new(&grid).unwrap();
        let p = naive.mixture_probs(2, 0.4, 0.05);
        assert!((p.xi_bar[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn three_policy_example() {
        let grid = build_policy_grid(&[(0, 0.3), (0, 0.7)], 1).unwrap();
        let naive = NaiveWeights::new(&grid).unwrap();
        let gamma = 0.1;
        let p = naive.mixture_probs(0, 0.5, gamma);
        assert!((p.xi_bar[1] - ((1.0 - 2.0 * gamma) / 3.0 + gamma)).abs() < 1e-12);
    }

    #[test]
    fn normalized_after_update() {
        let grid = build_policy_grid(&[(0, 0.3), (0, 0.7), (1, 0.1)], 2).unwrap();
        let mut naive = NaiveWeights::new(&grid).unwrap();
        let probs = naive.mixture_probs(0, 0.5, 0.1);
        naive.update(0, 0.5, 1, 0.9, &probs, 0.1, 0.02);
        let after = naive.mixture_probs(1, 0.05, 0.1);
        assert!((after.xi_bar[0] + after.xi_bar[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_huge_grids() {
        let obs: Vec<(usize, f64)> = (0..4)
            .flat_map(|i| (1..=40).map(move |k| (i, k as f64 / 40.0)))
            .collect();
        let grid = build_policy_grid(&obs, 4).unwrap();
        assert!(NaiveWeights::new(&grid).is_err());
    }
}
