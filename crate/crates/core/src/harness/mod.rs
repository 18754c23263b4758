//! Experiment runner: replicate runs over a horizon grid, regret via the
//! oracle, log-log exponent fits and flat-file outputs.

pub mod config;
pub mod fit;
pub mod runner;
pub mod selftest;

pub use config::{ExperimentConfig, StrategySpec, DEFAULT_HORIZONS, DEFAULT_REPLICATES};
pub use fit::{fit_regret_exponent, fit_summary_file, read_summary_points, ExponentFit};
pub use runner::{mean_and_stderr, run_experiment, run_once, run_seed, RegretSeries, RunOptions, RunRow, SummaryRow};
pub use selftest::{run_selftest, SelftestCheck};
