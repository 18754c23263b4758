//! Exhaustive checks on the threshold-policy class: shattering and grid
//! representativeness of the behaviours on a set of contexts.

use std::collections::BTreeSet;

use super::grid::PolicyGrid;

/// Decisions of threshold vector `v` on `contexts`.
pub fn behaviour(v: &[f64], contexts: &[(usize, f64)]) -> Vec<bool> {
    contexts.iter().map(|&(i, p)| v[i] >= p).collect()
}

/// Calls `f` with every vector of `axes[0] × ... × axes[n-1]`.
pub fn for_each_vector(axes: &[Vec<f64>], mut f: impl FnMut(&[f64])) {
    if axes.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; axes.len()];
    let mut v: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&v);
        let mut i = 0;
        loop {
            if i == axes.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                v[i] = axes[i][idx[i]];
                break;
            }
            idx[i] = 0;
            v[i] = axes[i][0];
            i += 1;
        }
    }
}

/// Distinct labelings of `contexts` realized by threshold vectors drawn from `axes`.
pub fn labelings(contexts: &[(usize, f64)], axes: &[Vec<f64>]) -> BTreeSet<Vec<bool>> {
    let mut out = BTreeSet::new();
    for_each_vector(axes, |v| {
        out.insert(behaviour(v, contexts));
    });
    out
}

/// `{0, step, 2 step, ..., cap}` on every axis.
pub fn fine_axes(n: usize, step: f64, cap: f64) -> Vec<Vec<f64>> {
    let k = (cap / step).round() as usize;
    let axis: Vec<f64> = (0..=k).map(|j| j as f64 * step).collect();
    vec![axis; n]
}

/// Axes that realize every labeling any real threshold vector could: every
/// context price plus a point above the largest, per index.
pub fn covering_axes(n: usize, contexts: &[(usize, f64)], cap: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut axis: Vec<f64> = contexts
                .iter()
                .filter(|c| c.0 == i)
                .map(|c| c.1)
                .chain([-1.0, cap + 1.0])
                .collect();
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            axis
        })
        .collect()
}

/// True iff threshold policies realize all `2^k` labelings of `contexts`.
pub fn is_shattered(n: usize, contexts: &[(usize, f64)], cap: f64) -> bool {
    labelings(contexts, &covering_axes(n, contexts, cap)).len() == 1 << contexts.len()
}

/// Behaviours of the grid policies on `contexts`.
pub fn grid_behaviours(grid: &PolicyGrid, contexts: &[(usize, f64)]) -> BTreeSet<Vec<bool>> {
    let axes: Vec<Vec<f64>> = (0..grid.n()).map(|i| grid.thresholds(i).to_vec()).collect();
    labelings(contexts, &axes)
}

#[cfg(test)]
mod tests {
    use super::super::grid::build_policy_grid;
    use super::*;

    #[test]
    fn unit_contexts_shattered_by_binary_vectors() {
        for n in 1..=4 {
            let contexts: Vec<(usize, f64)> = (0..n).map(|i| (i, 0.5)).collect();
            let binary = vec![vec![0.0, 1.0]; n];
            assert_eq!(labelings(&contexts, &binary).len(), 1 << n);
        }
    }

    #[test]
    fn two_contexts_on_one_index_not_shattered() {
        assert!(!is_shattered(1, &[(0, 0.3), (0, 0.6)], 1.0));
        assert!(is_shattered(2, &[(0, 0.3), (1, 0.6)], 1.0));
    }

    #[test]
    fn grid_represents_fine_sweep() {
        let contexts = [(0, 0.3), (0, 0.7), (1, 0.5), (0, 0.3)];
        let grid = build_policy_grid(&contexts, 2).unwrap();
        let fine = labelings(&contexts, &fine_axes(2, 0.01, 1.0));
        assert_eq!(grid_behaviours(&grid, &contexts), fine);
    }
}
