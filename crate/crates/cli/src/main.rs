use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use masked_auction::harness::{fit_summary_file, run_experiment, run_selftest, ExperimentConfig, RunOptions};
use masked_auction::Error;

#[derive(Parser)]
#[command(name = "masked-auction", version, about = "Regret experiments for masked posted-price auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (horizon, replicate) cell of an experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Overrides `seed_base` from the config.
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Fit a log-log regret exponent to a summary CSV.
    Fit {
        #[arg(long)]
        summary: PathBuf,
    },
    /// Brute-force equivalence and invariant checks.
    Selftest,
}

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { CONFIG_ERROR } else { RUNTIME_ERROR })
}

fn simulate(config: PathBuf, out: PathBuf, parallelism: usize, seed_base: Option<u64>) -> ExitCode {
    let mut cfg = match ExperimentConfig::from_path(&config) {
        Ok(c) => c,
        Err(Error::Io(e)) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
        Err(e) => return fail(e),
    };
    if let Some(s) = seed_base {
        cfg.seed_base = s;
    }
    if let Err(e) = cfg.validate() {
        return fail(e);
    }
    let options = RunOptions {
        parallelism,
        out_dir: Some(out.clone()),
    };
    match run_experiment(&cfg, &options) {
        Ok(series) => {
            for s in &series.summary {
                println!("T={} mean_regret={} stderr={}", s.horizon, s.mean_regret, s.stderr);
            }
            match series.fit() {
                Ok(f) => println!("slope={} intercept={} r2={}", f.slope, f.intercept, f.r_squared),
                Err(e) => println!("fit: {e}"),
            }
            println!("outputs in {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            parallelism,
            seed_base,
        } => simulate(config, out, parallelism, seed_base),
        Command::Fit { summary } => match fit_summary_file(&summary) {
            Ok(f) => {
                println!(
                    "slope {}\nintercept {}\nr_squared {}\nused {}\nexcluded {}",
                    f.slope, f.intercept, f.r_squared, f.used, f.excluded
                );
                ExitCode::SUCCESS
            }
            Err(Error::Io(e)) => {
                eprintln!("error: cannot read {}: {e}", summary.display());
                ExitCode::from(CONFIG_ERROR)
            }
            Err(e) => fail(e),
        },
        Command::Selftest => match run_selftest() {
            Ok(checks) => {
                let mut ok = true;
                for c in &checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    ok &= c.passed;
                }
                if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(RUNTIME_ERROR)
                }
            }
            Err(e) => fail(e),
        },
    }
}
