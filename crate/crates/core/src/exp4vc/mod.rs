//! Exp4.VC: exponential weights over threshold policies `buy iff v[h(x)] >= p`,
//! with the policy set taken from the prices seen in an initialization phase.

pub mod buckets;
pub mod checks;
pub mod grid;
pub mod naive;
pub mod strategy;

pub use buckets::{
    log_weight_of, mixture_probs, mixture_probs_counted, update_accumulators, BucketAccumulators,
    MixtureProbs,
};
pub use grid::{build_policy_grid, PolicyGrid};
pub use naive::{naive_mixture_probs, NaiveWeights};
pub use strategy::{confidence_bonus, exploration_rate, init_length, Exp4Vc, Exp4VcConfig};
