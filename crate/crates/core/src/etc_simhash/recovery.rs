//! Separator recovery by linear programming.
//!
//! For every bit `j` find `ŵ_j` with `σ_i (ŵ_j · x_i) >= 1` for all training
//! points, `σ_i = +1` if bit `j` of `y_i` is set and `-1` otherwise. The
//! free vector is split as `u - v` with `u, v >= 0` and the L1 norm is
//! minimized so the program is bounded.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use super::hashing::{simhash_unchecked, Separators, SignPattern};
use crate::error::{Error, Result};

fn solve_bit(samples: &[(Vec<f64>, SignPattern)], dim: usize, bit: usize) -> Result<Vec<f64>> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..dim).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..dim).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let mut constrained = false;
    for (x, y) in samples {
        let set = y.0[bit];
        if x.iter().all(|&c| c == 0.0) {
            // w . 0 = 0 always hashes to 1.
            if set {
                continue;
            }
            return Err(Error::RealizabilityViolation { bit });
        }
        let sigma = if set { 1.0 } else { -1.0 };
        let terms: Vec<_> = x
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| [(pos[k], sigma * c), (neg[k], -sigma * c)])
            .filter(|&(_, c)| c != 0.0)
            .collect();
        problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, 1.0);
        constrained = true;
    }
    if !constrained {
        // Every training point hashes to 1; so does any vector with
        // nonnegative entries on the box.
        return Ok(vec![1.0; dim]);
    }
    let solution = problem.solve().map_err(|e| match e {
        minilp::Error::Infeasible => Error::RealizabilityViolation { bit },
        other => Error::Internal(format!("separator LP for bit {bit}: {other}")),
    })?;
    Ok((0..dim)
        .map(|k| *solution.var_value(pos[k]) - *solution.var_value(neg[k]))
        .collect())
}

/// Recovers separators consistent with every training pair.
pub fn recover_separators(samples: &[(Vec<f64>, SignPattern)], dim: usize, bits: usize) -> Result<Separators> {
    if dim == 0 || bits == 0 {
        return Err(Error::invalid("separators", "d and l must be at least 1"));
    }
    for (x, y) in samples {
        if x.len() != dim || y.0.len() != bits {
            return Err(Error::invalid(
                "samples",
                format!("expected d={dim} points and l={bits} bits"),
            ));
        }
    }
    let rows = (0..bits)
        .map(|j| solve_bit(samples, dim, j))
        .collect::<Result<Vec<_>>>()?;
    let sep = Separators::new(rows)?;
    for (x, y) in samples {
        if simhash_unchecked(&sep, x) != *y {
            return Err(Error::Internal(format!(
                "recovered separators disagree with training point {x:?}"
            )));
        }
    }
    Ok(sep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Density;
    use crate::etc_simhash::hashing::simhash;
    use crate::rng::rng_from;

    #[test]
    fn two_point_example() {
        let samples = vec![
            (vec![0.2, 0.8], SignPattern(vec![true])),
            (vec![0.8, 0.2], SignPattern(vec![false])),
        ];
        let sep = recover_separators(&samples, 2, 1).unwrap();
        let w = &sep.rows()[0];
        assert!(w[0] * 0.2 + w[1] * 0.8 >= 1.0 - 1e-9);
        assert!(w[0] * 0.8 + w[1] * 0.2 <= -1.0 + 1e-9);
        for (x, y) in &samples {
            assert_eq!(&simhash(&sep, x).unwrap(), y);
        }
    }

    #[test]
    fn single_sample() {
        let samples = vec![(vec![0.3, 0.4], SignPattern(vec![false]))];
        let sep = recover_separators(&samples, 2, 1).unwrap();
        assert_eq!(simhash(&sep, &[0.3, 0.4]).unwrap().0, vec![false]);
    }

    #[test]
    fn recovers_random_separators() {
        let mut rng = rng_from(31);
        let truth = Separators::random(5, 3, &mut rng).unwrap();
        let samples: Vec<_> = (0..200)
            .map(|_| {
                let x = Density::Uniform.sample(5, &mut rng);
                let y = simhash(&truth, &x).unwrap();
                (x, y)
            })
            .collect();
        let sep = recover_separators(&samples, 5, 3).unwrap();
        for (x, y) in &samples {
            assert_eq!(&simhash(&sep, x).unwrap(), y);
        }
    }

    #[test]
    fn contradictory_samples_are_unrealizable() {
        let samples = vec![
            (vec![0.5, 0.5], SignPattern(vec![true])),
            (vec![1.0, 1.0], SignPattern(vec![false])),
        ];
        assert!(matches!(
            recover_separators(&samples, 2, 1),
            Err(Error::RealizabilityViolation { bit: 0 })
        ));
    }

    #[test]
    fn origin_must_hash_to_one() {
        let samples = vec![(vec![0.0, 0.0], SignPattern(vec![false]))];
        assert!(matches!(
            recover_separators(&samples, 2, 1),
            Err(Error::RealizabilityViolation { bit: 0 })
        ));
    }
}
