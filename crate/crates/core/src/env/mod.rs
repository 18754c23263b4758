//! Environment families: finite item tables with an explicit mask, and
//! continuous items on the unit box with a SimHash mask.

pub mod density;
pub mod descriptor;
pub mod prices;

use std::sync::{Arc, OnceLock};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use density::{Density, Valuation};
pub use descriptor::EnvDescriptor;
pub use prices::{
    adversarial_price_process, stochastic_price_process, AdversarialGenerator, PriceDistribution,
    PriceProcess, PriceSchedule, PriceTable,
};

use crate::error::{Error, Result};
use crate::etc_simhash::hashing::{simhash_unchecked, Separators};
use crate::oracle::ConditionalValueTable;
use crate::protocol::{Item, MaskValue};
use crate::rng::{derive_seed, rng_from, stream_seed, Stream};

/// Monte-Carlo sample count of the continuous-env oracle table.
pub const DEFAULT_ORACLE_SAMPLES: usize = 200_000;

/// Density and valuation of a continuous environment. The SimHash strategy
/// is handed this, never the mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownDistribution {
    pub dim: usize,
    pub density: Density,
    pub valuation: Valuation,
    pub value_cap: f64,
}

impl KnownDistribution {
    pub fn new(dim: usize, density: Density, valuation: Valuation, value_cap: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        check_cap(value_cap)?;
        density.validate(dim)?;
        valuation.validate(dim)?;
        Ok(KnownDistribution {
            dim,
            density,
            valuation,
            value_cap,
        })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.density.sample_into(rng, out);
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.valuation.value(x, self.value_cap)
    }
}

#[derive(Debug, Clone)]
pub enum ItemSource {
    Finite {
        values: Vec<f64>,
        probs: Vec<f64>,
        sampler: WeightedIndex<f64>,
    },
    Continuous(KnownDistribution),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    /// `map[item]` is the mask index of each finite item.
    Map { map: Vec<usize>, cardinality: usize },
    SimHash(Separators),
}

/// Ground truth of an environment: item law, valuation, mask and prices.
#[derive(Debug, Clone)]
pub struct EnvModel {
    source: ItemSource,
    mask: MaskSpec,
    prices: PriceProcess,
    value_cap: f64,
    oracle_samples: usize,
    oracle_seed: u64,
    table: OnceLock<Arc<ConditionalValueTable>>,
}

fn check_cap(value_cap: f64) -> Result<()> {
    if value_cap.is_finite() && value_cap > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("value_cap", format!("{value_cap} is not a positive real")))
    }
}

/// Builds a finite environment. Item `k` has value `values[k]`, probability
/// `probs[k]` and mask index `mask_map[k]`. `mask_cardinality` defaults to
/// one more than the largest mask index.
pub fn make_finite_env(
    values: Vec<f64>,
    probs: Vec<f64>,
    mask_map: Vec<usize>,
    mask_cardinality: Option<usize>,
    price_process: PriceProcess,
    value_cap: f64,
) -> Result<EnvModel> {
    check_cap(value_cap)?;
    if values.is_empty() {
        return Err(Error::invalid("values", "need at least one item"));
    }
    if probs.len() != values.len() {
        return Err(Error::invalid(
            "probs",
            format!("{} probabilities for {} items", probs.len(), values.len()),
        ));
    }
    if mask_map.len() != values.len() {
        return Err(Error::invalid(
            "mask_map",
            format!("{} entries for {} items", mask_map.len(), values.len()),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=value_cap).contains(*v)) {
        return Err(Error::invalid("values", format!("{v} outside [0, {value_cap}]")));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("probs", "entries must be nonnegative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("probs", format!("sum to {total}, not 1")));
    }
    let needed = mask_map.iter().max().map_or(0, |m| m + 1);
    let cardinality = mask_cardinality.unwrap_or(needed);
    if cardinality < needed || cardinality == 0 {
        return Err(Error::invalid(
            "mask_map",
            format!("mask index {} exceeds cardinality {cardinality}", needed - 1),
        ));
    }
    price_process.validate(cardinality, value_cap)?;
    let sampler = WeightedIndex::new(&probs)
        .map_err(|e| Error::invalid("probs", e.to_string()))?;
    Ok(EnvModel {
        source: ItemSource::Finite {
            values,
            probs,
            sampler,
        },
        mask: MaskSpec::Map {
            map: mask_map,
            cardinality,
        },
        prices: price_process,
        value_cap,
        oracle_samples: DEFAULT_ORACLE_SAMPLES,
        oracle_seed: 0,
        table: OnceLock::new(),
    })
}

/// Builds a SimHash environment on `[0,1]^d` with `bits` random separators
/// drawn from `separator_seed`.
pub fn make_simhash_env(
    dim: usize,
    bits: usize,
    density: Density,
    valuation: Valuation,
    separator_seed: u64,
    price_process: PriceProcess,
    value_cap: f64,
) -> Result<EnvModel> {
    let mut rng = rng_from(stream_seed(separator_seed, Stream::Separators));
    let separators = Separators::random(dim, bits, &mut rng)?;
    let mut env = simhash_env_with_separators(
        KnownDistribution::new(dim, density, valuation, value_cap)?,
        separators,
        price_process,
    )?;
    env.oracle_seed = stream_seed(separator_seed, Stream::Oracle);
    Ok(env)
}

/// SimHash environment with explicitly given separators.
pub fn simhash_env_with_separators(
    known: KnownDistribution,
    separators: Separators,
    price_process: PriceProcess,
) -> Result<EnvModel> {
    if separators.dim() != known.dim {
        return Err(Error::invalid(
            "separators",
            format!("dimension {} but items live in d={}", separators.dim(), known.dim),
        ));
    }
    if separators.bits() >= usize::BITS as usize - 1 {
        return Err(Error::invalid("l", "too many bits"));
    }
    let cardinality = 1usize << separators.bits();
    let value_cap = known.value_cap;
    price_process.validate(cardinality, value_cap)?;
    Ok(EnvModel {
        source: ItemSource::Continuous(known),
        mask: MaskSpec::SimHash(separators),
        prices: price_process,
        value_cap,
        oracle_samples: DEFAULT_ORACLE_SAMPLES,
        oracle_seed: 0,
        table: OnceLock::new(),
    })
}

impl EnvModel {
    /// Overrides the oracle's Monte-Carlo sample count. Ignored by finite envs.
    pub fn with_oracle_samples(mut self, samples: usize) -> Self {
        self.oracle_samples = samples.max(1);
        self.table = OnceLock::new();
        self
    }

    pub fn with_oracle_seed(mut self, seed: u64) -> Self {
        self.oracle_seed = seed;
        self.table = OnceLock::new();
        self
    }

    /// Replaces the price process, keeping everything else.
    pub fn with_price_process(&self, price_process: PriceProcess) -> Result<Self> {
        price_process.validate(self.mask_cardinality(), self.value_cap)?;
        Ok(EnvModel {
            prices: price_process,
            ..self.clone()
        })
    }

    pub fn value_cap(&self) -> f64 {
        self.value_cap
    }

    pub fn mask_cardinality(&self) -> usize {
        match &self.mask {
            MaskSpec::Map { cardinality, .. } => *cardinality,
            MaskSpec::SimHash(sep) => 1 << sep.bits(),
        }
    }

    pub fn item_source(&self) -> &ItemSource {
        &self.source
    }

    pub fn mask_spec(&self) -> &MaskSpec {
        &self.mask
    }

    pub fn price_process(&self) -> &PriceProcess {
        &self.prices
    }

    pub fn known_distribution(&self) -> Option<&KnownDistribution> {
        match &self.source {
            ItemSource::Continuous(k) => Some(k),
            ItemSource::Finite { .. } => None,
        }
    }

    pub fn separators(&self) -> Option<&Separators> {
        match &self.mask {
            MaskSpec::SimHash(s) => Some(s),
            MaskSpec::Map { .. } => None,
        }
    }

    pub fn oracle_samples(&self) -> usize {
        self.oracle_samples
    }

    pub(crate) fn oracle_seed(&self) -> u64 {
        self.oracle_seed
    }

    pub fn sample_item<R: Rng + ?Sized>(&self, rng: &mut R) -> Item {
        match &self.source {
            ItemSource::Finite { sampler, .. } => Item::FiniteId(sampler.sample(rng)),
            ItemSource::Continuous(k) => {
                let mut x = vec![0.0; k.dim];
                k.sample_into(rng, &mut x);
                Item::Point(x)
            }
        }
    }

    /// `v*(x)`.
    ///
    /// # Panics
    /// If the item belongs to another environment family.
    pub fn value_of(&self, item: &Item) -> f64 {
        match (&self.source, item) {
            (ItemSource::Finite { values, .. }, Item::FiniteId(k)) => values[*k],
            (ItemSource::Continuous(known), Item::Point(x)) => known.value(x),
            _ => panic!("item {item:?} does not belong to this environment"),
        }
    }

    /// `h(x)`.
    pub fn mask_of(&self, item: &Item) -> MaskValue {
        match (&self.mask, item) {
            (MaskSpec::Map { map, .. }, Item::FiniteId(k)) => MaskValue::Index(map[*k]),
            (MaskSpec::SimHash(sep), Item::Point(x)) => simhash_unchecked(sep, x).to_mask(),
            _ => panic!("item {item:?} does not belong to this environment"),
        }
    }

    /// Checks that `item` could have been drawn from this environment.
    pub fn contains(&self, item: &Item) -> bool {
        match (&self.source, item) {
            (ItemSource::Finite { values, .. }, Item::FiniteId(k)) => *k < values.len(),
            (ItemSource::Continuous(known), Item::Point(x)) => {
                x.len() == known.dim && x.iter().all(|c| (0.0..=1.0).contains(c))
            }
            _ => false,
        }
    }

    /// Conditional values and masses of every mask value, built on first use.
    pub fn conditional_table(&self) -> Arc<ConditionalValueTable> {
        self.table
            .get_or_init(|| Arc::new(ConditionalValueTable::build(self)))
            .clone()
    }

    /// Anchors for adversarial generators. Masks without mass anchor at `H/2`.
    pub fn price_anchors(&self) -> Vec<f64> {
        let table = self.conditional_table();
        (0..self.mask_cardinality())
            .map(|y| {
                table
                    .lookup(self, y)
                    .map(|e| e.value)
                    .unwrap_or(self.value_cap / 2.0)
            })
            .collect()
    }

    /// Realizes the price process for one run.
    pub fn price_schedule(&self, horizon: usize, seed: u64) -> Result<PriceSchedule> {
        let anchors = match self.prices {
            PriceProcess::Adversarial { .. } => self.price_anchors(),
            PriceProcess::Stochastic { .. } => Vec::new(),
        };
        PriceSchedule::new(&self.prices, horizon, self.value_cap, &anchors, seed)
    }

    /// The adversarial table a run with this seed would face.
    pub fn materialize_prices(&self, horizon: usize, run_seed: u64) -> Result<Option<PriceTable>> {
        match self.price_schedule(horizon, stream_seed(run_seed, Stream::Prices))? {
            PriceSchedule::Table(t) => Ok(Some(t)),
            PriceSchedule::Stochastic { .. } => Ok(None),
        }
    }

    pub(crate) fn refinement_seed(&self, pattern: usize) -> u64 {
        derive_seed(self.oracle_seed, pattern as u64 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn uniform_prices(masks: usize) -> PriceProcess {
        stochastic_price_process(
            vec![PriceDistribution::Uniform { low: 0.0, high: 1.0 }],
            masks,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn probs_must_normalize() {
        let err = make_finite_env(
            vec![0.2, 0.8],
            vec![0.5, 0.6],
            vec![0, 0],
            None,
            uniform_prices(1),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { field: "probs", .. }));
    }

    #[test]
    fn values_above_cap_rejected() {
        let err = make_finite_env(vec![1.2], vec![1.0], vec![0], None, uniform_prices(1), 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { field: "values", .. }));
    }

    #[test]
    fn price_process_must_cover_masks() {
        let process = PriceProcess::Stochastic {
            per_mask: vec![PriceDistribution::Point { value: 0.5 }],
        };
        assert!(make_finite_env(
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0, 1],
            None,
            process,
            1.0
        )
        .is_err());
    }

    #[test]
    fn finite_sampling_matches_probs() {
        let probs = vec![0.1, 0.2, 0.3, 0.4];
        let env = make_finite_env(
            vec![0.1, 0.2, 0.3, 0.4],
            probs.clone(),
            vec![0, 0, 1, 1],
            None,
            uniform_prices(2),
            1.0,
        )
        .unwrap();
        let mut rng = rng_from(77);
        let draws = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            match env.sample_item(&mut rng) {
                Item::FiniteId(k) => counts[k] += 1,
                Item::Point(_) => unreachable!(),
            }
        }
        for (c, p) in counts.iter().zip(&probs) {
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn simhash_patterns_have_mass() {
        let env = make_simhash_env(
            2,
            1,
            Density::Uniform,
            Valuation::MeanCoordinate,
            5,
            uniform_prices(2),
            1.0,
        )
        .unwrap();
        let table = env.conditional_table();
        assert!(table.mass.iter().all(|&m| m > 0.0), "{:?}", table.mass);
    }

    #[test]
    fn items_stay_in_box() {
        let env = make_simhash_env(
            4,
            3,
            Density::TruncatedGaussian {
                mean: vec![0.5; 4],
                std: vec![0.3; 4],
            },
            Valuation::MeanCoordinate,
            8,
            uniform_prices(8),
            1.0,
        )
        .unwrap();
        let mut rng = rng_from(0);
        for _ in 0..1000 {
            let item = env.sample_item(&mut rng);
            assert!(env.contains(&item));
            assert!(env.mask_of(&item).index() < 8);
        }
    }
}
