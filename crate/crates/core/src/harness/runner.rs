//! Seeded replicate runs over a horizon grid.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StrategySpec};
use super::fit::{fit_regret_exponent, ExponentFit};
use crate::env::EnvModel;
use crate::error::{Error, Result};
use crate::oracle::regret;
use crate::protocol::run_protocol;
use crate::rng::derive_seed;

pub const ROUNDS_HEADER: &str =
    "run_id,t,mask,price,decision,utility,oracle_decision,regret_contribution,cum_regret";
pub const RUNS_HEADER: &str = "run_id,T,replicate,seed,final_regret,utility,purchases";
pub const SUMMARY_HEADER: &str = "T,mean_regret,stderr,replicates";

/// Seed of replicate `rep` at horizon `T`.
pub fn run_seed(seed_base: u64, horizon: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(seed_base, horizon as u64), rep as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub horizon: usize,
    pub replicate: usize,
    pub seed: u64,
    pub final_regret: f64,
    pub utility: f64,
    pub purchases: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub horizon: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub replicates: usize,
}

/// Mean and standard error of the mean, summing in the given order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

impl RegretSeries {
    /// Aggregates rows per horizon, replicates in ascending order.
    pub fn from_runs(mut runs: Vec<RunRow>) -> Self {
        runs.sort_by_key(|r| (r.horizon, r.replicate));
        let mut summary = Vec::new();
        for chunk in runs.chunk_by(|a, b| a.horizon == b.horizon) {
            let values: Vec<f64> = chunk.iter().map(|r| r.final_regret).collect();
            let (mean_regret, stderr) = mean_and_stderr(&values);
            summary.push(SummaryRow {
                horizon: chunk[0].horizon,
                mean_regret,
                stderr,
                replicates: chunk.len(),
            });
        }
        RegretSeries { runs, summary }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.summary
            .iter()
            .map(|s| (s.horizon as f64, s.mean_regret))
            .collect()
    }

    pub fn fit(&self) -> Result<ExponentFit> {
        fit_regret_exponent(&self.points())
    }
}

/// One finished run, with its per-round CSV body if requested.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: RunRow,
    pub rounds_csv: Option<String>,
}

pub fn run_once(
    env: &EnvModel,
    spec: &StrategySpec,
    horizon: usize,
    replicate: usize,
    seed: u64,
    run_id: usize,
    with_rounds: bool,
) -> Result<RunOutcome> {
    let mut strategy = spec.build(env)?;
    let transcript = run_protocol(env, strategy.as_mut(), horizon, seed)?;
    let ledger = regret(&transcript, env)?;
    let rounds_csv = with_rounds.then(|| {
        let mut out = String::with_capacity(horizon * 64);
        for (k, r) in transcript.records.iter().enumerate() {
            let _ = writeln!(
                out,
                "{run_id},{},{},{},{},{},{},{},{}",
                r.t,
                r.mask,
                r.price,
                u8::from(r.decision),
                r.utility,
                u8::from(ledger.oracle_decision[k]),
                ledger.contribution[k],
                ledger.cumulative[k]
            );
        }
        out
    });
    Ok(RunOutcome {
        row: RunRow {
            run_id,
            horizon,
            replicate,
            seed,
            final_regret: ledger.total(),
            utility: transcript.total_utility(),
            purchases: transcript.records.iter().filter(|r| r.decision).count(),
        },
        rounds_csv,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub parallelism: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            parallelism: 1,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct HorizonMeta {
    horizon: usize,
    exploration_length: Option<usize>,
    capped_at_half: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    strategy: &'static str,
    config: &'a ExperimentConfig,
    mask_cardinality: usize,
    oracle_exact: bool,
    horizons: Vec<HorizonMeta>,
    runs: usize,
    version: &'static str,
}

struct Outputs {
    rounds: Option<BufWriter<File>>,
    runs: BufWriter<File>,
}

/// Runs every `(T, replicate)` cell of `config`, writing outputs when
/// `options.out_dir` is set.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RegretSeries> {
    let env = config.validate()?;
    for &t in &config.horizons {
        config.strategy.exploration_length(&env, t)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let cells: Vec<(usize, usize)> = config
        .horizons
        .iter()
        .flat_map(|&t| (0..config.replicates).map(move |r| (t, r)))
        .collect();
    let with_rounds = options.out_dir.is_some() && config.write_rounds;
    let mut outputs = match &options.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let rounds = if with_rounds {
                let mut w = BufWriter::new(File::create(dir.join("rounds.csv"))?);
                writeln!(w, "{ROUNDS_HEADER}")?;
                Some(w)
            } else {
                None
            };
            let mut runs = BufWriter::new(File::create(dir.join("runs.csv"))?);
            writeln!(runs, "{RUNS_HEADER}")?;
            Some(Outputs { rounds, runs })
        }
        None => None,
    };
    env.conditional_table();
    let batch = options.parallelism.max(1) * 2;
    let mut rows = Vec::with_capacity(cells.len());
    for (b, chunk) in cells.chunks(batch).enumerate() {
        let results: Vec<Result<RunOutcome>> = pool.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(k, &(t, rep))| {
                    let seed = run_seed(config.seed_base, t, rep);
                    run_once(&env, &config.strategy, t, rep, seed, b * batch + k, with_rounds)
                })
                .collect()
        });
        for result in results {
            let outcome = result?;
            if let Some(out) = outputs.as_mut() {
                if let (Some(w), Some(text)) = (out.rounds.as_mut(), &outcome.rounds_csv) {
                    w.write_all(text.as_bytes())?;
                }
                let r = &outcome.row;
                writeln!(
                    out.runs,
                    "{},{},{},{},{},{},{}",
                    r.run_id, r.horizon, r.replicate, r.seed, r.final_regret, r.utility, r.purchases
                )?;
            }
            rows.push(outcome.row);
        }
    }
    let series = RegretSeries::from_runs(rows);
    if let (Some(dir), Some(mut out)) = (&options.out_dir, outputs) {
        if let Some(w) = out.rounds.as_mut() {
            w.flush()?;
        }
        out.runs.flush()?;
        write_summary_outputs(dir, config, &env, &series)?;
    }
    Ok(series)
}

fn write_summary_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    env: &EnvModel,
    series: &RegretSeries,
) -> Result<()> {
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut dat = String::from("# T mean_regret stderr\n");
    for s in &series.summary {
        let _ = writeln!(summary, "{},{},{},{}", s.horizon, s.mean_regret, s.stderr, s.replicates);
        let _ = writeln!(dat, "{} {} {}", s.horizon, s.mean_regret, s.stderr);
    }
    std::fs::write(dir.join("summary.csv"), summary)?;
    let fit_text = match series.fit() {
        Ok(f) => {
            let _ = writeln!(dat, "# fit: ln R = {} ln T + {}", f.slope, f.intercept);
            format!(
                "slope {}\nintercept {}\nr_squared {}\nused {}\nexcluded {}\n",
                f.slope, f.intercept, f.r_squared, f.used, f.excluded
            )
        }
        Err(e) => format!("{e}\n"),
    };
    std::fs::write(dir.join("fit.txt"), fit_text)?;
    std::fs::write(dir.join("regret.dat"), dat)?;
    let horizons = config
        .horizons
        .iter()
        .map(|&t| {
            let len = config.strategy.exploration_length(env, t)?;
            Ok(HorizonMeta {
                horizon: t,
                exploration_length: len,
                capped_at_half: len == Some(t / 2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = Metadata {
        strategy: config.strategy.id(),
        config,
        mask_cardinality: env.mask_cardinality(),
        oracle_exact: env.conditional_table().exact,
        horizons,
        runs: series.runs.len(),
        version: env!("CARGO_PKG_VERSION"),
    };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvDescriptor;
    use crate::harness::config::StrategySpec;

    fn config(strategy: StrategySpec, horizons: Vec<usize>, replicates: usize) -> ExperimentConfig {
        let env = EnvDescriptor::from_json(
            r#"{"family":"finite","values":[0.9,0.7],"probs":[0.5,0.5],"mask_map":[0,1],
                "prices":{"type":"stochastic","per_mask":[{"kind":"point","value":0.3}]}}"#,
        )
        .unwrap();
        ExperimentConfig {
            env,
            strategy,
            horizons,
            replicates,
            seed_base: 11,
            write_rounds: true,
        }
    }

    #[test]
    fn oracle_has_zero_regret() {
        let s = run_experiment(&config(StrategySpec::Oracle, vec![100, 200], 3), &RunOptions::default()).unwrap();
        assert!(s.summary.iter().all(|r| r.mean_regret == 0.0 && r.replicates == 3));
    }

    #[test]
    fn never_buy_is_linear() {
        let c = config(StrategySpec::NeverBuy, vec![100, 300, 1000, 3000], 4);
        let fit = run_experiment(&c, &RunOptions::default()).unwrap().fit().unwrap();
        assert!((fit.slope - 1.0).abs() <= 0.05, "{fit:?}");
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let c = config(
            StrategySpec::EtcFinite(Default::default()),
            vec![100, 400],
            5,
        );
        let a = run_experiment(&c, &RunOptions::default()).unwrap();
        let b = run_experiment(
            &c,
            &RunOptions {
                parallelism: 3,
                out_dir: None,
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn writes_all_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(StrategySpec::AlwaysBuy, vec![10, 20, 40, 80], 2);
        run_experiment(
            &c,
            &RunOptions {
                parallelism: 1,
                out_dir: Some(dir.path().to_path_buf()),
            },
        )
        .unwrap();
        for f in ["rounds.csv", "runs.csv", "summary.csv", "fit.txt", "regret.dat", "metadata.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let rounds = std::fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
        assert_eq!(rounds.lines().count(), 1 + 2 * (10 + 20 + 40 + 80));
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
