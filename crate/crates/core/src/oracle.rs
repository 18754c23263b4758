//! The myopic oracle: buy iff the conditional value given the mask exceeds
//! the price, and the realized regret against it.

use std::collections::HashMap;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::env::{EnvModel, ItemSource, MaskSpec};
use crate::error::{Error, Result};
use crate::etc_simhash::hashing::simhash_unchecked;
use crate::protocol::{BuyerStrategy, MaskValue, Purchase, RunSetup, Transcript};
use crate::rng::rng_from;

/// Hits a continuous pattern needs before the table entry is trusted as is.
pub const MIN_PATTERN_HITS: u64 = 2_000;
const MAX_REFINEMENT_DRAWS: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub value: f64,
    /// Zero for exact (finite) tables.
    pub std_error: f64,
    pub samples: u64,
}

/// `E[v*(x) | h(x) = y]` and `Pr[h(x) = y]` for every mask value `y`.
#[derive(Debug)]
pub struct ConditionalValueTable {
    /// Zero where the mask value has no observed mass.
    pub cond_value: Vec<f64>,
    pub mass: Vec<f64>,
    pub std_error: Vec<f64>,
    pub exact: bool,
    hits: Vec<u64>,
    refined: Mutex<HashMap<usize, Option<ConditionalEstimate>>>,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    fn estimate(&self) -> Option<ConditionalEstimate> {
        if self.n == 0 {
            return None;
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = (self.sumsq / n - mean * mean).max(0.0);
        Some(ConditionalEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
            samples: self.n,
        })
    }
}

impl ConditionalValueTable {
    pub(crate) fn build(env: &EnvModel) -> Self {
        let masks = env.mask_cardinality();
        match (env.item_source(), env.mask_spec()) {
            (ItemSource::Finite { values, probs, .. }, MaskSpec::Map { map, .. }) => {
                let mut mass = vec![0.0; masks];
                let mut weighted = vec![0.0; masks];
                for ((v, p), &y) in values.iter().zip(probs).zip(map) {
                    mass[y] += p;
                    weighted[y] += v * p;
                }
                let cond_value = weighted
                    .iter()
                    .zip(&mass)
                    .map(|(w, m)| if *m > 0.0 { (w / m).clamp(0.0, env.value_cap()) } else { 0.0 })
                    .collect();
                ConditionalValueTable {
                    cond_value,
                    mass,
                    std_error: vec![0.0; masks],
                    exact: true,
                    hits: vec![0; masks],
                    refined: Mutex::new(HashMap::new()),
                }
            }
            (ItemSource::Continuous(known), MaskSpec::SimHash(sep)) => {
                let n = env.oracle_samples();
                let mut rng = rng_from(env.oracle_seed());
                let mut moments = vec![Moments::default(); masks];
                let mut x = vec![0.0; known.dim];
                for _ in 0..n {
                    known.sample_into(&mut rng, &mut x);
                    let y = simhash_unchecked(sep, &x).index();
                    moments[y].push(known.value(&x));
                }
                let estimates: Vec<_> = moments.iter().map(Moments::estimate).collect();
                ConditionalValueTable {
                    cond_value: estimates.iter().map(|e| e.map_or(0.0, |e| e.value)).collect(),
                    mass: moments.iter().map(|m| m.n as f64 / n as f64).collect(),
                    std_error: estimates.iter().map(|e| e.map_or(0.0, |e| e.std_error)).collect(),
                    exact: false,
                    hits: moments.iter().map(|m| m.n).collect(),
                    refined: Mutex::new(HashMap::new()),
                }
            }
            _ => unreachable!("environment constructors pair item sources with masks"),
        }
    }

    /// Conditional value of mask index `y`. Sparse continuous patterns are
    /// re-estimated once with a pattern-specific seed.
    pub fn lookup(&self, env: &EnvModel, y: usize) -> Result<ConditionalEstimate> {
        if y >= self.mass.len() {
            return Err(Error::invalid(
                "mask",
                format!("index {y} outside 0..{}", self.mass.len()),
            ));
        }
        if self.exact {
            return if self.mass[y] > 0.0 {
                Ok(ConditionalEstimate {
                    value: self.cond_value[y],
                    std_error: 0.0,
                    samples: 0,
                })
            } else {
                Err(Error::NoMass(y.to_string()))
            };
        }
        let table_entry = (self.hits[y] > 0).then(|| ConditionalEstimate {
            value: self.cond_value[y],
            std_error: self.std_error[y],
            samples: self.hits[y],
        });
        if self.hits[y] >= MIN_PATTERN_HITS {
            return Ok(table_entry.expect("hits > 0"));
        }
        let mut refined = self.refined.lock();
        let entry = *refined
            .entry(y)
            .or_insert_with(|| refine_pattern(env, y).or(table_entry));
        entry.ok_or_else(|| Error::NoMass(y.to_string()))
    }
}

fn refine_pattern(env: &EnvModel, y: usize) -> Option<ConditionalEstimate> {
    let (ItemSource::Continuous(known), MaskSpec::SimHash(sep)) = (env.item_source(), env.mask_spec())
    else {
        return None;
    };
    let mut rng = rng_from(env.refinement_seed(y));
    let mut moments = Moments::default();
    let mut x = vec![0.0; known.dim];
    let mut draws = 0;
    while moments.n < MIN_PATTERN_HITS && draws < MAX_REFINEMENT_DRAWS {
        known.sample_into(&mut rng, &mut x);
        draws += 1;
        if simhash_unchecked(sep, &x).index() == y {
            moments.push(known.value(&x));
        }
    }
    moments.estimate()
}

pub fn conditional_value_with_error(env: &EnvModel, mask: &MaskValue) -> Result<ConditionalEstimate> {
    if let (MaskValue::Bits(bits), Some(sep)) = (mask, env.separators()) {
        if bits.len() != sep.bits() {
            return Err(Error::invalid(
                "mask",
                format!("expected {} bits, got {}", sep.bits(), bits.len()),
            ));
        }
    }
    env.conditional_table().lookup(env, mask.index())
}

/// `E[v*(x) | h(x) = mask]`.
pub fn conditional_value(env: &EnvModel, mask: &MaskValue) -> Result<f64> {
    conditional_value_with_error(env, mask).map(|e| e.value)
}

/// Buys iff `cond_value > price`, strictly.
pub fn oracle_decision(cond_value: f64, price: f64) -> bool {
    cond_value > price
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub oracle_decision: Vec<bool>,
    pub contribution: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretLedger {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Realized regret of a transcript against the myopic oracle on the same items.
pub fn regret(transcript: &Transcript, env: &EnvModel) -> Result<RegretLedger> {
    let rounds = transcript.records.len();
    if rounds != transcript.horizon || transcript.truth.len() != rounds {
        return Err(Error::invalid(
            "transcript",
            format!(
                "{rounds} records, {} ground-truth entries, horizon {}",
                transcript.truth.len(),
                transcript.horizon
            ),
        ));
    }
    let mut ledger = RegretLedger {
        oracle_decision: Vec::with_capacity(rounds),
        contribution: Vec::with_capacity(rounds),
        cumulative: Vec::with_capacity(rounds),
    };
    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut running = 0.0;
    for (record, truth) in transcript.records.iter().zip(&transcript.truth) {
        if !env.contains(&truth.item)
            || env.value_of(&truth.item) != truth.value
            || env.mask_of(&truth.item) != record.mask
        {
            return Err(Error::invalid(
                "transcript",
                format!("round {} was not produced by this environment", record.t),
            ));
        }
        let y = record.mask.index();
        let cond = match cache.get(&y) {
            Some(c) => *c,
            None => {
                let c = conditional_value(env, &record.mask)?;
                cache.insert(y, c);
                c
            }
        };
        let star = oracle_decision(cond, record.price);
        let delta = f64::from(u8::from(star)) - f64::from(u8::from(record.decision));
        let contribution = (truth.value - record.price) * delta;
        running += contribution;
        ledger.oracle_decision.push(star);
        ledger.contribution.push(contribution);
        ledger.cumulative.push(running);
    }
    Ok(ledger)
}

/// Plays the myopic oracle using the environment's ground truth.
#[derive(Debug, Clone)]
pub struct OracleStrategy {
    env: EnvModel,
    cache: HashMap<usize, Option<f64>>,
}

impl OracleStrategy {
    pub fn new(env: &EnvModel) -> Self {
        OracleStrategy {
            env: env.clone(),
            cache: HashMap::new(),
        }
    }
}

impl BuyerStrategy for OracleStrategy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn begin(&mut self, setup: &RunSetup) -> Result<()> {
        if setup.mask_cardinality != self.env.mask_cardinality() {
            return Err(Error::invalid("env", "oracle built for a different environment"));
        }
        Ok(())
    }

    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool> {
        let y = mask.index();
        let cond = match self.cache.get(&y) {
            Some(c) => *c,
            None => {
                let c = match conditional_value(&self.env, mask) {
                    Ok(c) => Some(c),
                    Err(Error::NoMass(_)) => None,
                    Err(e) => return Err(e),
                };
                self.cache.insert(y, c);
                c
            }
        };
        Ok(cond.is_some_and(|c| oracle_decision(c, price)))
    }

    fn feedback(&mut self, _: Option<&Purchase<'_>>) -> Result<()> {
        Ok(())
    }
}
