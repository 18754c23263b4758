//! JSON environment descriptors.
//!
//! ```json
//! {
//!   "family": "finite",
//!   "values": [0.2, 0.8], "probs": [0.5, 0.5], "mask_map": [0, 1],
//!   "value_cap": 1.0,
//!   "prices": { "type": "stochastic", "per_mask": [{ "kind": "uniform", "low": 0.0, "high": 1.0 }] }
//! }
//! ```
//!
//! SimHash environments use `"family": "simhash"` with `d`, `l`, `density`,
//! `valuation` and `separator_seed` (or explicit `separators` rows). Adversarial
//! prices are `{ "type": "adversarial", "generator": "near-oracle", "seed": 3 }`
//! plus optional generator parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    make_finite_env, make_simhash_env, simhash_env_with_separators, AdversarialGenerator, Density,
    EnvModel, KnownDistribution, PriceDistribution, PriceProcess, Valuation,
};
use crate::error::{Error, Result};
use crate::etc_simhash::hashing::Separators;

fn default_cap() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyedBy {
    #[default]
    Mask,
    Item,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriceSpec {
    Stochastic {
        #[serde(default)]
        keyed_by: KeyedBy,
        /// One entry per mask value, or a single entry shared by all.
        per_mask: Vec<PriceDistribution>,
    },
    Adversarial {
        #[serde(default)]
        keyed_by: KeyedBy,
        #[serde(flatten)]
        generator: AdversarialGenerator,
        #[serde(default)]
        seed: u64,
    },
}

impl PriceSpec {
    fn to_process(&self, masks: usize, value_cap: f64) -> Result<PriceProcess> {
        let (PriceSpec::Stochastic { keyed_by, .. } | PriceSpec::Adversarial { keyed_by, .. }) = self;
        if *keyed_by == KeyedBy::Item {
            return Err(Error::invalid(
                "prices.keyed_by",
                "prices may depend on the mask value only",
            ));
        }
        match self {
            PriceSpec::Stochastic { per_mask, .. } => {
                super::stochastic_price_process(per_mask.clone(), masks, value_cap)
            }
            PriceSpec::Adversarial { generator, seed, .. } => Ok(PriceProcess::Adversarial {
                generator: generator.clone(),
                seed: *seed,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EnvDescriptor {
    Finite {
        values: Vec<f64>,
        probs: Vec<f64>,
        mask_map: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask_cardinality: Option<usize>,
        #[serde(default = "default_cap")]
        value_cap: f64,
        prices: PriceSpec,
    },
    Simhash {
        d: usize,
        l: usize,
        density: Density,
        valuation: Valuation,
        #[serde(default)]
        separator_seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        separators: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_cap")]
        value_cap: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle_samples: Option<usize>,
        prices: PriceSpec,
    },
}

impl EnvDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<EnvModel> {
        match self {
            EnvDescriptor::Finite {
                values,
                probs,
                mask_map,
                mask_cardinality,
                value_cap,
                prices,
            } => {
                let masks = mask_cardinality
                    .unwrap_or_else(|| mask_map.iter().max().map_or(1, |m| m + 1));
                make_finite_env(
                    values.clone(),
                    probs.clone(),
                    mask_map.clone(),
                    *mask_cardinality,
                    prices.to_process(masks, *value_cap)?,
                    *value_cap,
                )
            }
            EnvDescriptor::Simhash {
                d,
                l,
                density,
                valuation,
                separator_seed,
                separators,
                value_cap,
                oracle_samples,
                prices,
            } => {
                if *l == 0 || *l > 20 {
                    return Err(Error::invalid("l", "must lie in 1..=20"));
                }
                let process = prices.to_process(1 << l, *value_cap)?;
                let env = match separators {
                    None => make_simhash_env(
                        *d,
                        *l,
                        density.clone(),
                        valuation.clone(),
                        *separator_seed,
                        process,
                        *value_cap,
                    )?,
                    Some(rows) => {
                        let sep = Separators::new(rows.clone())?;
                        if sep.bits() != *l {
                            return Err(Error::invalid(
                                "separators",
                                format!("{} rows for l={l}", sep.bits()),
                            ));
                        }
                        simhash_env_with_separators(
                            KnownDistribution::new(*d, density.clone(), valuation.clone(), *value_cap)?,
                            sep,
                            process,
                        )?
                        .with_oracle_seed(*separator_seed)
                    }
                };
                Ok(match oracle_samples {
                    Some(n) => env.with_oracle_samples(*n),
                    None => env,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_roundtrip() {
        let text = r#"{
            "family": "finite",
            "values": [0.2, 0.8], "probs": [0.5, 0.5], "mask_map": [0, 1],
            "prices": { "type": "stochastic", "per_mask": [{ "kind": "uniform", "low": 0.0, "high": 1.0 }] }
        }"#;
        let desc = EnvDescriptor::from_json(text).unwrap();
        let env = desc.build().unwrap();
        assert_eq!(env.mask_cardinality(), 2);
        let back = EnvDescriptor::from_json(&serde_json::to_string(&desc).unwrap()).unwrap();
        assert_eq!(back, desc);
    }

    #[test]
    fn adversarial_parses_with_defaults() {
        let text = r#"{
            "family": "finite",
            "values": [0.2, 0.8], "probs": [0.5, 0.5], "mask_map": [0, 0],
            "prices": { "type": "adversarial", "generator": "periodic-spike", "period": 5, "seed": 3 }
        }"#;
        let desc = EnvDescriptor::from_json(text).unwrap();
        match &desc {
            EnvDescriptor::Finite {
                prices: PriceSpec::Adversarial { generator, seed, .. },
                ..
            } => {
                assert_eq!(*seed, 3);
                assert_eq!(
                    *generator,
                    AdversarialGenerator::PeriodicSpike {
                        period: 5,
                        low_max: 0.3
                    }
                );
            }
            other => panic!("{other:?}"),
        }
        desc.build().unwrap();
    }

    #[test]
    fn item_keyed_prices_rejected() {
        let text = r#"{
            "family": "finite",
            "values": [0.2, 0.8], "probs": [0.5, 0.5], "mask_map": [0, 0],
            "prices": { "type": "stochastic", "keyed_by": "item", "per_mask": [{ "kind": "point", "value": 0.5 }] }
        }"#;
        let err = EnvDescriptor::from_json(text).unwrap().build().unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { field: "prices.keyed_by", .. }));
    }

    #[test]
    fn simhash_descriptor() {
        let text = r#"{
            "family": "simhash", "d": 3, "l": 2,
            "density": { "kind": "uniform" },
            "valuation": { "kind": "mean_coordinate" },
            "separator_seed": 11,
            "oracle_samples": 1000,
            "prices": { "type": "stochastic", "per_mask": [{ "kind": "uniform", "low": 0.0, "high": 1.0 }] }
        }"#;
        let env = EnvDescriptor::from_json(text).unwrap().build().unwrap();
        assert_eq!(env.mask_cardinality(), 4);
        assert_eq!(env.oracle_samples(), 1000);
    }

    #[test]
    fn unknown_generator_is_a_parse_error() {
        let text = r#"{
            "family": "finite",
            "values": [0.2], "probs": [1.0], "mask_map": [0],
            "prices": { "type": "adversarial", "generator": "greedy" }
        }"#;
        assert!(matches!(EnvDescriptor::from_json(text), Err(Error::Json(_))));
    }
}
