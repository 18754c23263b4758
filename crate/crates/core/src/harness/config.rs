//! Experiment configuration.
//!
//! ```json
//! {
//!   "env": { "family": "finite", ... },
//!   "strategy": { "id": "etc-finite", "c": 0.05 },
//!   "horizons": [2000, 5000, 12000, 30000, 75000],
//!   "replicates": 50,
//!   "seed_base": 7
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{EnvDescriptor, EnvModel};
use crate::error::{Error, Result};
use crate::etc_finite::{EtcFinite, EtcFiniteConfig};
use crate::etc_simhash::{Doubling, EtcSimHash, EtcSimHashConfig, StrategyFactory};
use crate::exp4vc::{init_length, Exp4Vc, Exp4VcConfig};
use crate::oracle::OracleStrategy;
use crate::protocol::{AlwaysBuy, BuyerStrategy, FixedThreshold, NeverBuy};

pub const DEFAULT_HORIZONS: [usize; 5] = [2000, 5000, 12000, 30000, 75000];
pub const DEFAULT_REPLICATES: usize = 50;

fn default_horizons() -> Vec<usize> {
    DEFAULT_HORIZONS.to_vec()
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_true() -> bool {
    true
}

fn default_t0() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum StrategySpec {
    Exp4vc(Exp4VcConfig),
    EtcFinite(EtcFiniteConfig),
    EtcSimhash(EtcSimHashConfig),
    EtcSimhashDoubling {
        #[serde(default = "default_t0")]
        t0: usize,
        #[serde(flatten)]
        inner: EtcSimHashConfig,
    },
    Oracle,
    AlwaysBuy,
    NeverBuy,
    FixedThreshold { thresholds: Vec<f64> },
}

impl StrategySpec {
    pub fn id(&self) -> &'static str {
        match self {
            StrategySpec::Exp4vc(_) => "exp4vc",
            StrategySpec::EtcFinite(_) => "etc-finite",
            StrategySpec::EtcSimhash(_) => "etc-simhash",
            StrategySpec::EtcSimhashDoubling { .. } => "etc-simhash-doubling",
            StrategySpec::Oracle => "oracle",
            StrategySpec::AlwaysBuy => "always-buy",
            StrategySpec::NeverBuy => "never-buy",
            StrategySpec::FixedThreshold { .. } => "fixed-threshold",
        }
    }

    /// A fresh strategy for `env`.
    pub fn build(&self, env: &EnvModel) -> Result<Box<dyn BuyerStrategy>> {
        Ok(match self {
            StrategySpec::Exp4vc(c) => Box::new(Exp4Vc::new(*c)),
            StrategySpec::EtcFinite(c) => Box::new(EtcFinite::new(*c)),
            StrategySpec::EtcSimhash(c) => Box::new(EtcSimHash::new(known(env)?, *c)),
            StrategySpec::EtcSimhashDoubling { t0, inner } => {
                let (k, c) = (known(env)?, *inner);
                let factory: StrategyFactory =
                    Box::new(move || Box::new(EtcSimHash::new(k.clone(), c)) as Box<dyn BuyerStrategy>);
                Box::new(Doubling::new(*t0, factory))
            }
            StrategySpec::Oracle => Box::new(OracleStrategy::new(env)),
            StrategySpec::AlwaysBuy => Box::new(AlwaysBuy),
            StrategySpec::NeverBuy => Box::new(NeverBuy),
            StrategySpec::FixedThreshold { thresholds } => Box::new(FixedThreshold {
                thresholds: thresholds.clone(),
            }),
        })
    }

    /// Length of the initial explore phase at horizon `T`, if the strategy has one.
    pub fn exploration_length(&self, env: &EnvModel, horizon: usize) -> Result<Option<usize>> {
        let n = env.mask_cardinality();
        Ok(match self {
            StrategySpec::Exp4vc(c) => Some(init_length(horizon, n, c.delta)?),
            StrategySpec::EtcFinite(c) => Some(c.exploration_length(horizon, n)?),
            StrategySpec::EtcSimhash(c) => {
                let k = known(env)?;
                Some(crate::etc_simhash::exploration_length(
                    horizon,
                    k.dim,
                    n.trailing_zeros() as usize,
                    c.delta,
                    c.c,
                )?)
            }
            _ => None,
        })
    }

    fn validate(&self, env: &EnvModel) -> Result<()> {
        match self {
            StrategySpec::Exp4vc(c) if !(c.delta > 0.0 && c.delta < 1.0) => {
                Err(Error::invalid("strategy.delta", format!("{} not in (0,1)", c.delta)))
            }
            StrategySpec::EtcFinite(c) if !(c.c.is_finite() && c.c > 0.0) => {
                Err(Error::invalid("strategy.c", format!("multiplier {} must be positive", c.c)))
            }
            StrategySpec::EtcSimhash(c) | StrategySpec::EtcSimhashDoubling { inner: c, .. } => {
                known(env)?;
                if c.n_samples == 0 {
                    return Err(Error::invalid("strategy.n_samples", "must be at least 1"));
                }
                if !(c.c.is_finite() && c.c > 0.0) {
                    return Err(Error::invalid("strategy.c", format!("multiplier {} must be positive", c.c)));
                }
                if let StrategySpec::EtcSimhashDoubling { t0, .. } = self {
                    if *t0 < 2 {
                        return Err(Error::invalid("strategy.t0", format!("{t0} < 2")));
                    }
                }
                Ok(())
            }
            StrategySpec::FixedThreshold { thresholds } if thresholds.len() != env.mask_cardinality() => {
                Err(Error::invalid(
                    "strategy.thresholds",
                    format!("need one threshold per mask value ({})", env.mask_cardinality()),
                ))
            }
            _ => Ok(()),
        }
    }
}

fn known(env: &EnvModel) -> Result<crate::env::KnownDistribution> {
    env.known_distribution()
        .cloned()
        .ok_or_else(|| Error::invalid("strategy.id", "SimHash strategies need a simhash environment"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvDescriptor,
    pub strategy: StrategySpec,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Write the per-round CSV; it is large at long horizons.
    #[serde(default = "default_true")]
    pub write_rounds: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the config and builds its environment.
    pub fn validate(&self) -> Result<EnvModel> {
        if self.horizons.is_empty() {
            return Err(Error::invalid("horizons", "empty horizon grid"));
        }
        if self.horizons[0] == 0 {
            return Err(Error::invalid("horizons", "horizons must be positive"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("horizons", "must be strictly increasing"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "need at least one replicate"));
        }
        let env = self.env.build()?;
        self.strategy.validate(&env)?;
        Ok(env)
    }
}
