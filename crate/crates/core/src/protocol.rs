//! Round-by-round posted-price protocol.
//!
//! Each round the environment draws an item, publishes its mask and a
//! mask-measurable price, the strategy decides, and only a purchase reveals
//! the item. The realized item of every round is also written to a
//! ground-truth side channel of the [`Transcript`] for regret accounting;
//! strategies never see it.

use serde::{Deserialize, Serialize};

use crate::env::EnvModel;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, stream_seed, Stream};

/// An item: a row of a finite table or a point of the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    FiniteId(usize),
    Point(Vec<f64>),
}

/// The masked image `h(x)` the seller publishes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskValue {
    Index(usize),
    Bits(Vec<bool>),
}

impl MaskValue {
    /// Dense index of the mask value; bit vectors read little-endian.
    pub fn index(&self) -> usize {
        match self {
            MaskValue::Index(i) => *i,
            MaskValue::Bits(bits) => bits
                .iter()
                .enumerate()
                .fold(0, |acc, (j, &b)| acc | (usize::from(b) << j)),
        }
    }

    pub fn bits_from_index(index: usize, len: usize) -> MaskValue {
        MaskValue::Bits((0..len).map(|j| (index >> j) & 1 == 1).collect())
    }
}

impl std::fmt::Display for MaskValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskValue::Index(i) => write!(f, "{i}"),
            MaskValue::Bits(bits) => {
                for &b in bits {
                    f.write_str(if b { "1" } else { "0" })?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub mask: MaskValue,
    pub price: f64,
    pub decision: bool,
    pub utility: f64,
    pub revealed_item: Option<Item>,
}

/// The realized item of a round, kept out of the strategy's view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub item: Item,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<RoundRecord>,
    pub horizon: usize,
    pub seed: u64,
    pub truth: Vec<GroundTruth>,
}

impl Transcript {
    pub fn total_utility(&self) -> f64 {
        self.records.iter().map(|r| r.utility).sum()
    }
}

/// What a strategy learns when it buys.
#[derive(Debug, Clone, Copy)]
pub struct Purchase<'a> {
    pub item: &'a Item,
    pub value: f64,
    pub utility: f64,
}

/// Public facts about a run handed to a strategy before round one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSetup {
    pub horizon: usize,
    pub value_cap: f64,
    pub mask_cardinality: usize,
    /// Seed of the strategy's private randomness stream.
    pub seed: u64,
}

/// A buyer strategy. Per round the protocol calls `decide` exactly once and
/// then `feedback` exactly once; `feedback` carries the item only after a
/// purchase.
pub trait BuyerStrategy: Send {
    fn name(&self) -> &str;

    /// Resets all internal state for a fresh run.
    fn begin(&mut self, setup: &RunSetup) -> Result<()>;

    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool>;

    fn feedback(&mut self, purchase: Option<&Purchase<'_>>) -> Result<()>;
}

pub fn buyer_utility(value: f64, price: f64, decision: bool) -> f64 {
    if decision {
        value - price
    } else {
        0.0
    }
}

/// Runs `horizon` rounds of the protocol between `env` and `strategy`.
pub fn run_protocol(
    env: &EnvModel,
    strategy: &mut dyn BuyerStrategy,
    horizon: usize,
    seed: u64,
) -> Result<Transcript> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let mut item_rng = stream_rng(seed, Stream::Items);
    let mut prices = env.price_schedule(horizon, stream_seed(seed, Stream::Prices))?;
    strategy.begin(&RunSetup {
        horizon,
        value_cap: env.value_cap(),
        mask_cardinality: env.mask_cardinality(),
        seed: stream_seed(seed, Stream::Strategy),
    })?;

    let mut records = Vec::with_capacity(horizon);
    let mut truth = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let item = env.sample_item(&mut item_rng);
        let value = env.value_of(&item);
        let mask = env.mask_of(&item);
        let price = prices.price(t, mask.index());

        let decision = strategy.decide(&mask, price)?;
        let utility = buyer_utility(value, price, decision);
        if decision {
            strategy.feedback(Some(&Purchase {
                item: &item,
                value,
                utility,
            }))?;
        } else {
            strategy.feedback(None)?;
        }

        records.push(RoundRecord {
            t,
            mask,
            price,
            decision,
            utility,
            revealed_item: decision.then(|| item.clone()),
        });
        truth.push(GroundTruth { item, value });
    }
    Ok(Transcript {
        records,
        horizon,
        seed,
        truth,
    })
}

#[derive(Debug, Clone, Default)]
pub struct AlwaysBuy;

impl BuyerStrategy for AlwaysBuy {
    fn name(&self) -> &str {
        "always-buy"
    }
    fn begin(&mut self, _: &RunSetup) -> Result<()> {
        Ok(())
    }
    fn decide(&mut self, _: &MaskValue, _: f64) -> Result<bool> {
        Ok(true)
    }
    fn feedback(&mut self, _: Option<&Purchase<'_>>) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct NeverBuy;

impl BuyerStrategy for NeverBuy {
    fn name(&self) -> &str {
        "never-buy"
    }
    fn begin(&mut self, _: &RunSetup) -> Result<()> {
        Ok(())
    }
    fn decide(&mut self, _: &MaskValue, _: f64) -> Result<bool> {
        Ok(false)
    }
    fn feedback(&mut self, _: Option<&Purchase<'_>>) -> Result<()> {
        Ok(())
    }
}

/// Threshold policy: buys iff `thresholds[h(x)] >= price`.
#[derive(Debug, Clone)]
pub struct FixedThreshold {
    pub thresholds: Vec<f64>,
}

impl BuyerStrategy for FixedThreshold {
    fn name(&self) -> &str {
        "fixed-threshold"
    }
    fn begin(&mut self, setup: &RunSetup) -> Result<()> {
        if self.thresholds.len() != setup.mask_cardinality {
            return Err(Error::invalid(
                "thresholds",
                format!(
                    "expected {} entries, got {}",
                    setup.mask_cardinality,
                    self.thresholds.len()
                ),
            ));
        }
        Ok(())
    }
    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool> {
        Ok(self.thresholds[mask.index()] >= price)
    }
    fn feedback(&mut self, _: Option<&Purchase<'_>>) -> Result<()> {
        Ok(())
    }
}
