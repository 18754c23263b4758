//! Price processes.
//!
//! Every process is keyed by the mask index, never by the item, so a price
//! cannot carry information beyond `h(x)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceDistribution {
    Uniform { low: f64, high: f64 },
    Point { value: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl PriceDistribution {
    fn validate(&self, cap: f64) -> Result<()> {
        let in_range = |p: f64| p.is_finite() && (0.0..=cap).contains(&p);
        let ok = match self {
            PriceDistribution::Uniform { low, high } => in_range(*low) && in_range(*high) && low <= high,
            PriceDistribution::Point { value } => in_range(*value),
            PriceDistribution::Discrete { values, probs } => {
                !values.is_empty()
                    && values.len() == probs.len()
                    && values.iter().all(|&p| in_range(p))
                    && probs.iter().all(|&q| q >= 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "price_process",
                format!("{self:?} is not a distribution supported in [0, {cap}]"),
            ))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PriceDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            PriceDistribution::Point { value } => *value,
            PriceDistribution::Discrete { values, probs } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (v, q) in values.iter().zip(probs) {
                    acc += q;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("non-empty")
            }
        }
    }
}

/// Oblivious adversarial price generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum AdversarialGenerator {
    /// Cycles each mask's price through an evenly spaced grid of offsets
    /// around its conditional value.
    ThresholdSweep {
        #[serde(default = "default_sweep_width")]
        width: f64,
        #[serde(default = "default_sweep_steps")]
        steps: usize,
    },
    /// Low prices with a spike to `H` every `period` rounds.
    PeriodicSpike {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default = "default_low_max")]
        low_max: f64,
    },
    /// Conditional value minus `epsilon` on odd rounds, plus on even rounds.
    NearOracle {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_sweep_width() -> f64 {
    0.2
}
fn default_sweep_steps() -> usize {
    21
}
fn default_period() -> usize {
    10
}
fn default_low_max() -> f64 {
    0.3
}
fn default_epsilon() -> f64 {
    0.05
}

impl AdversarialGenerator {
    /// Looks up a generator by id with default parameters.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "threshold-sweep" => Ok(AdversarialGenerator::ThresholdSweep {
                width: default_sweep_width(),
                steps: default_sweep_steps(),
            }),
            "periodic-spike" => Ok(AdversarialGenerator::PeriodicSpike {
                period: default_period(),
                low_max: default_low_max(),
            }),
            "near-oracle" => Ok(AdversarialGenerator::NearOracle {
                epsilon: default_epsilon(),
            }),
            other => Err(Error::invalid(
                "generator",
                format!("unknown generator id `{other}`"),
            )),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            AdversarialGenerator::ThresholdSweep { .. } => "threshold-sweep",
            AdversarialGenerator::PeriodicSpike { .. } => "periodic-spike",
            AdversarialGenerator::NearOracle { .. } => "near-oracle",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            AdversarialGenerator::ThresholdSweep { width, steps } => {
                width.is_finite() && *width >= 0.0 && *steps >= 2
            }
            AdversarialGenerator::PeriodicSpike { period, low_max } => {
                *period >= 1 && (0.0..=1.0).contains(low_max)
            }
            AdversarialGenerator::NearOracle { epsilon } => epsilon.is_finite() && *epsilon >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("generator", format!("bad parameters {self:?}")))
        }
    }
}

/// Materialized `(t, mask) -> price` table of an oblivious adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    horizon: usize,
    masks: usize,
    prices: Vec<f64>,
}

impl PriceTable {
    /// Price at round `t` (1-based) under mask index `mask`.
    pub fn get(&self, t: usize, mask: usize) -> f64 {
        self.prices[(t - 1) * self.masks + mask]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn masks(&self) -> usize {
        self.masks
    }
}

/// Builds the full price table before any buyer decision is made.
///
/// `anchors[y]` is the conditional value the generator centres on for mask `y`.
pub fn adversarial_price_process(
    generator: &AdversarialGenerator,
    horizon: usize,
    anchors: &[f64],
    value_cap: f64,
    seed: u64,
) -> Result<PriceTable> {
    generator.validate()?;
    let masks = anchors.len();
    if masks == 0 {
        return Err(Error::invalid("anchors", "need at least one mask value"));
    }
    let mut rng = rng_from(seed);
    let clamp = |p: f64| p.clamp(0.0, value_cap);
    let mut prices = Vec::with_capacity(horizon * masks);
    match *generator {
        AdversarialGenerator::ThresholdSweep { width, steps } => {
            let phases: Vec<usize> = (0..masks).map(|_| rng.random_range(0..steps)).collect();
            for t in 1..=horizon {
                for (y, &anchor) in anchors.iter().enumerate() {
                    let k = (t + phases[y]) % steps;
                    let offset = -width + 2.0 * width * k as f64 / (steps - 1) as f64;
                    prices.push(clamp(anchor + offset * value_cap));
                }
            }
        }
        AdversarialGenerator::PeriodicSpike { period, low_max } => {
            for t in 1..=horizon {
                for _ in 0..masks {
                    if t % period == 0 {
                        prices.push(value_cap);
                    } else {
                        prices.push(low_max * value_cap * rng.random::<f64>());
                    }
                }
            }
        }
        AdversarialGenerator::NearOracle { epsilon } => {
            for t in 1..=horizon {
                let sign = if t % 2 == 1 { -1.0 } else { 1.0 };
                for &anchor in anchors {
                    prices.push(clamp(anchor + sign * epsilon * value_cap));
                }
            }
        }
    }
    Ok(PriceTable {
        horizon,
        masks,
        prices,
    })
}

/// A price process attached to an environment.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceProcess {
    /// I.i.d. draws per round from a per-mask distribution.
    Stochastic { per_mask: Vec<PriceDistribution> },
    /// Oblivious table anchored on the environment's conditional values.
    Adversarial {
        generator: AdversarialGenerator,
        seed: u64,
    },
}

impl PriceProcess {
    pub(crate) fn validate(&self, masks: usize, value_cap: f64) -> Result<()> {
        match self {
            PriceProcess::Stochastic { per_mask } => {
                if per_mask.len() != masks {
                    return Err(Error::invalid(
                        "price_process",
                        format!("{} distributions for {masks} mask values", per_mask.len()),
                    ));
                }
                per_mask.iter().try_for_each(|d| d.validate(value_cap))
            }
            PriceProcess::Adversarial { generator, .. } => generator.validate(),
        }
    }
}

/// Validates per-mask price distributions. A single entry is broadcast to all masks.
pub fn stochastic_price_process(
    per_mask: Vec<PriceDistribution>,
    masks: usize,
    value_cap: f64,
) -> Result<PriceProcess> {
    let per_mask = match per_mask.len() {
        1 => vec![per_mask[0].clone(); masks],
        len if len == masks => per_mask,
        len => {
            return Err(Error::invalid(
                "price_process",
                format!("{len} distributions for {masks} mask values"),
            ))
        }
    };
    for dist in &per_mask {
        dist.validate(value_cap)?;
    }
    Ok(PriceProcess::Stochastic { per_mask })
}

/// Per-run realization of a [`PriceProcess`].
pub enum PriceSchedule {
    Stochastic {
        per_mask: Vec<PriceDistribution>,
        rng: ChaCha8Rng,
    },
    Table(PriceTable),
}

impl PriceSchedule {
    pub(crate) fn new(
        process: &PriceProcess,
        horizon: usize,
        value_cap: f64,
        anchors: &[f64],
        run_seed: u64,
    ) -> Result<Self> {
        Ok(match process {
            PriceProcess::Stochastic { per_mask } => PriceSchedule::Stochastic {
                per_mask: per_mask.clone(),
                rng: rng_from(run_seed),
            },
            PriceProcess::Adversarial { generator, seed } => PriceSchedule::Table(adversarial_price_process(
                generator,
                horizon,
                anchors,
                value_cap,
                derive_seed(run_seed, *seed),
            )?),
        })
    }

    pub fn price(&mut self, t: usize, mask: usize) -> f64 {
        match self {
            PriceSchedule::Stochastic { per_mask, rng } => per_mask[mask].sample(rng),
            PriceSchedule::Table(table) => table.get(t, mask),
        }
    }
}
