//! Bucket decomposition of the policy weights.
//!
//! A grid policy picks one threshold index `k_i` per mask index. Its log
//! weight is `sum_i L_i(k_i)` with
//! `L_i(k) = sum_{j <= k} G[i][j][1] + sum_{j > k} G[i][j][0]`,
//! so sums over the whole product grid factor into per-index log-sum-exps.

use serde::{Deserialize, Serialize};

use super::grid::PolicyGrid;
use crate::error::{Error, Result};

/// Log-domain cumulative exponents `G[i][j][b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketAccumulators {
    offsets: Vec<usize>,
    g: Vec<[f64; 2]>,
}

impl BucketAccumulators {
    pub fn new(grid: &PolicyGrid) -> Self {
        let mut offsets = Vec::with_capacity(grid.n() + 1);
        let mut total = 0;
        for i in 0..grid.n() {
            offsets.push(total);
            total += grid.cells(i);
        }
        offsets.push(total);
        BucketAccumulators {
            offsets,
            g: vec![[0.0; 2]; total],
        }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn cells(&self, i: usize) -> &[[f64; 2]] {
        &self.g[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.cells(i)[j][b]
    }

    /// `L_i(k)` for the policy with threshold `p_{i,k}`.
    pub fn index_log_factor(&self, i: usize, k: usize) -> f64 {
        let cells = self.cells(i);
        cells[..=k].iter().map(|c| c[1]).sum::<f64>() + cells[k + 1..].iter().map(|c| c[0]).sum::<f64>()
    }
}

/// `(ξ̄[0], ξ̄[1])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureProbs {
    pub xi_bar: [f64; 2],
}

/// Log weight of the grid policy with threshold indices `policy[i]`.
pub fn log_weight_of(acc: &BucketAccumulators, policy: &[usize]) -> f64 {
    policy
        .iter()
        .enumerate()
        .map(|(i, &k)| acc.index_log_factor(i, k))
        .sum()
}

#[derive(Clone, Copy)]
struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    const EMPTY: Lse = Lse {
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };

    fn push(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn merge(self, other: Lse) -> Lse {
        let mut out = self;
        if other.sum == 0.0 {
            return out;
        }
        if out.sum == 0.0 {
            return other;
        }
        if other.max > out.max {
            out.sum = out.sum * (out.max - other.max).exp() + other.sum;
            out.max = other.max;
        } else {
            out.sum += other.sum * (other.max - out.max).exp();
        }
        out
    }

    fn value(self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Mixture probabilities at context `(i_t, j_t)` and the number of
/// accumulator cells read.
pub fn mixture_probs_counted(
    grid: &PolicyGrid,
    acc: &BucketAccumulators,
    i_t: usize,
    j_t: usize,
    gamma: f64,
) -> Result<(MixtureProbs, u64)> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::invalid("gamma", format!("{gamma} outside (0, 1/2)")));
    }
    if acc.n() != grid.n() || i_t >= grid.n() || j_t >= grid.cells(i_t) {
        return Err(Error::invalid("context", format!("({i_t}, {j_t}) not in grid")));
    }
    let mut ops = 0u64;
    let mut log_w = 0.0;
    let (mut low, mut high) = (Lse::EMPTY, Lse::EMPTY);
    let mut suffix = Vec::with_capacity(grid.max_m() + 2);
    for i in 0..grid.n() {
        let cells = acc.cells(i);
        ops += cells.len() as u64;
        // suffix[k] = sum_{j > k} G[i][j][0]
        suffix.clear();
        suffix.resize(cells.len(), 0.0);
        for j in (0..cells.len() - 1).rev() {
            suffix[j] = suffix[j + 1] + cells[j + 1][0];
        }
        let mut prefix1 = 0.0;
        let (mut lo, mut hi) = (Lse::EMPTY, Lse::EMPTY);
        for k in 0..=grid.m(i) {
            prefix1 += cells[k][1];
            let l = prefix1 + suffix[k];
            if i == i_t && k < j_t {
                lo.push(l);
            } else {
                hi.push(l);
            }
        }
        let full = lo.merge(hi);
        log_w += full.value();
        if i == i_t {
            low = lo;
            high = hi;
        }
    }
    let (lo_full, hi_full) = {
        let full = low.merge(high).value();
        (low.value() - full, high.value() - full)
    };
    // S_b / W; the factors of every other index cancel.
    let share0 = if lo_full.is_finite() { lo_full.exp() } else { 0.0 };
    let share1 = if hi_full.is_finite() { hi_full.exp() } else { 0.0 };
    let drift = (share0 + share1 - 1.0).abs();
    if !log_w.is_finite() || drift.is_nan() || drift > 1e-9 {
        return Err(Error::Internal(format!(
            "mixture normalization failed (log W = {log_w}, shares {share0} + {share1})"
        )));
    }
    let xi1 = (1.0 - 2.0 * gamma) * share1 + gamma;
    let xi0 = (1.0 - 2.0 * gamma) * share0 + gamma;
    Ok((MixtureProbs { xi_bar: [xi0, xi1] }, ops))
}

pub fn mixture_probs(
    grid: &PolicyGrid,
    acc: &BucketAccumulators,
    i_t: usize,
    j_t: usize,
    gamma: f64,
) -> Result<MixtureProbs> {
    mixture_probs_counted(grid, acc, i_t, j_t, gamma).map(|(p, _)| p)
}

/// Importance-weighted estimate of both arms given the pulled arm's
/// mapped reward.
pub fn reward_estimate(arm: usize, reward: f64, probs: &MixtureProbs) -> [f64; 2] {
    let mut r_hat = [0.0; 2];
    r_hat[arm] = reward / probs.xi_bar[arm];
    r_hat
}

/// Exponent increment `f_b` for each arm.
pub fn exponent_increments(
    arm: usize,
    reward: f64,
    probs: &MixtureProbs,
    gamma: f64,
    bonus: f64,
) -> [f64; 2] {
    let r_hat = reward_estimate(arm, reward, probs);
    [0, 1].map(|b| gamma / 2.0 * (r_hat[b] + bonus / probs.xi_bar[b]))
}

/// Adds `f_b` to `G[i_t][j_t][b]`; every other cell is untouched.
#[allow(clippy::too_many_arguments)]
pub fn update_accumulators(
    acc: &mut BucketAccumulators,
    i_t: usize,
    j_t: usize,
    arm: usize,
    reward: f64,
    probs: &MixtureProbs,
    gamma: f64,
    bonus: f64,
) -> Result<()> {
    if arm > 1 {
        return Err(Error::invalid("arm", format!("{arm} is not 0 or 1")));
    }
    if !(0.0..=1.0).contains(&reward) {
        return Err(Error::invalid("reward", format!("{reward} outside [0, 1]")));
    }
    if probs.xi_bar[arm] < gamma * (1.0 - 1e-12) {
        return Err(Error::Internal(format!(
            "mixture floor violated: {} < {gamma}",
            probs.xi_bar[arm]
        )));
    }
    let f = exponent_increments(arm, reward, probs, gamma, bonus);
    let offset = acc.offsets[i_t];
    if j_t >= acc.offsets[i_t + 1] - offset {
        return Err(Error::invalid("context", format!("bucket {j_t} not in index {i_t}")));
    }
    let cell = &mut acc.g[offset + j_t];
    cell[0] += f[0];
    cell[1] += f[1];
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::grid::build_policy_grid;
    use super::*;

    #[test]
    fn fresh_weights_count_buying_policies() {
        let grid = build_policy_grid(&[(0, 0.3), (0, 0.7)], 1).unwrap();
        let acc = BucketAccumulators::new(&grid);
        let gamma = 0.1;
        let j = grid.locate_bucket(0, 0.5);
        let p = mixture_probs(&grid, &acc, 0, j, gamma).unwrap();
        assert!((p.xi_bar[1] - ((1.0 - 2.0 * gamma) / 3.0 + gamma)).abs() < 1e-12);

        let p = mixture_probs(&grid, &acc, 0, 0, gamma).unwrap();
        assert!((p.xi_bar[1] - (1.0 - gamma)).abs() < 1e-12);
    }

    #[test]
    fn single_policy_grid_never_buys_at_positive_price() {
        let grid = build_policy_grid(&[], 2).unwrap();
        let acc = BucketAccumulators::new(&grid);
        let j = grid.locate_bucket(1, 0.2);
        let p = mixture_probs(&grid, &acc, 1, j, 0.05).unwrap();
        assert!((p.xi_bar[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn update_touches_one_cell() {
        let grid = build_policy_grid(&[(0, 0.2), (1, 0.4), (1, 0.6)], 2).unwrap();
        let mut acc = BucketAccumulators::new(&grid);
        let probs = mixture_probs(&grid, &acc, 1, 1, 0.1).unwrap();
        let before = acc.clone();
        update_accumulators(&mut acc, 1, 1, 1, 0.7, &probs, 0.1, 0.05).unwrap();
        for i in 0..2 {
            for j in 0..grid.cells(i) {
                for b in 0..2 {
                    if (i, j) != (1, 1) {
                        assert_eq!(acc.get(i, j, b), before.get(i, j, b));
                    } else {
                        assert_ne!(acc.get(i, j, b), before.get(i, j, b));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_reward_without_bonus_is_a_no_op() {
        let grid = build_policy_grid(&[(0, 0.2)], 1).unwrap();
        let mut acc = BucketAccumulators::new(&grid);
        let probs = mixture_probs(&grid, &acc, 0, 1, 0.1).unwrap();
        let before = acc.clone();
        update_accumulators(&mut acc, 0, 1, 0, 0.0, &probs, 0.1, 0.0).unwrap();
        assert_eq!(acc, before);
    }

    #[test]
    fn floor_violation_is_internal_error() {
        let grid = build_policy_grid(&[(0, 0.2)], 1).unwrap();
        let mut acc = BucketAccumulators::new(&grid);
        let probs = MixtureProbs { xi_bar: [0.01, 0.99] };
        assert!(matches!(
            update_accumulators(&mut acc, 0, 1, 0, 0.5, &probs, 0.1, 0.0),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn op_count_is_number_of_cells() {
        let grid = build_policy_grid(&[(0, 0.2), (0, 0.3), (2, 0.9)], 3).unwrap();
        let acc = BucketAccumulators::new(&grid);
        let (_, ops) = mixture_probs_counted(&grid, &acc, 0, 1, 0.1).unwrap();
        assert_eq!(ops, (4 + 2 + 3) as u64);
    }
}
