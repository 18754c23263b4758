use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hashing::{Separators, SignPattern};
use super::recovery::recover_separators;
use super::region::{estimate_region_mean, PolytopeRegion, RegionEstimate, DEFAULT_REGION_SAMPLES};
use crate::env::KnownDistribution;
use crate::error::{Error, Result};
use crate::protocol::{BuyerStrategy, Item, MaskValue, Purchase, RunSetup};
use crate::rng::derive_seed;

pub const DEFAULT_MULTIPLIER: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.1;

/// `ceil(c sqrt(4 T d l ln(l/δ)))`, capped at `floor(T/2)`.
pub fn exploration_length(horizon: usize, dim: usize, bits: usize, delta: f64, c: f64) -> Result<usize> {
    if horizon == 0 || dim == 0 || bits == 0 {
        return Err(Error::invalid("T", "T, d and l must be at least 1"));
    }
    if !(delta > 0.0 && delta < bits as f64) {
        return Err(Error::invalid("delta", format!("need 0 < δ < l (δ={delta}, l={bits})")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid("c", format!("multiplier {c} must be positive")));
    }
    let (t, d, l) = (horizon as f64, dim as f64, bits as f64);
    let raw = c * (4.0 * t * d * l * (l / delta).ln()).sqrt();
    Ok((raw.ceil() as usize).max(1).min(horizon / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EtcSimHashConfig {
    pub c: f64,
    pub delta: f64,
    pub n_samples: usize,
    /// Bootstrap resamples per region estimate; 0 reports `s / sqrt(k)`.
    pub bootstrap_reps: usize,
}

impl Default for EtcSimHashConfig {
    fn default() -> Self {
        EtcSimHashConfig {
            c: DEFAULT_MULTIPLIER,
            delta: DEFAULT_DELTA,
            n_samples: DEFAULT_REGION_SAMPLES,
            bootstrap_reps: 0,
        }
    }
}

/// Cached outcome of one pattern's estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PatternEstimate {
    Estimated(RegionEstimate),
    /// Preset from outside, e.g. exact oracle means.
    Preset(f64),
    NoMass,
}

impl PatternEstimate {
    pub fn value(&self) -> f64 {
        match self {
            PatternEstimate::Estimated(e) => e.estimate,
            PatternEstimate::Preset(v) => *v,
            PatternEstimate::NoMass => 0.0,
        }
    }
}

/// Explore-then-commit for SimHash masks under a known item distribution.
#[derive(Debug, Clone)]
pub struct EtcSimHash {
    config: EtcSimHashConfig,
    known: KnownDistribution,
    forced: Option<Separators>,
    presets: BTreeMap<SignPattern, f64>,
    setup: Option<RunSetup>,
    bits: usize,
    t_prime: usize,
    t: usize,
    samples: Vec<(Vec<f64>, SignPattern)>,
    separators: Option<Separators>,
    cache: BTreeMap<SignPattern, PatternEstimate>,
    estimations: usize,
    no_mass_rounds: usize,
    pending: Option<(SignPattern, bool)>,
}

impl EtcSimHash {
    pub fn new(known: KnownDistribution, config: EtcSimHashConfig) -> Self {
        EtcSimHash {
            config,
            known,
            forced: None,
            presets: BTreeMap::new(),
            setup: None,
            bits: 0,
            t_prime: 0,
            t: 0,
            samples: Vec::new(),
            separators: None,
            cache: BTreeMap::new(),
            estimations: 0,
            no_mass_rounds: 0,
            pending: None,
        }
    }

    /// Skips recovery and exploits under these separators.
    pub fn with_forced_separators(mut self, sep: Separators) -> Self {
        self.forced = Some(sep);
        self
    }

    /// Uses `value` for `pattern` instead of estimating it.
    pub fn with_preset_mean(mut self, pattern: SignPattern, value: f64) -> Self {
        self.presets.insert(pattern, value);
        self
    }

    pub fn t_prime(&self) -> usize {
        self.t_prime
    }

    pub fn separators(&self) -> Option<&Separators> {
        self.separators.as_ref()
    }

    pub fn training_samples(&self) -> &[(Vec<f64>, SignPattern)] {
        &self.samples
    }

    /// Number of region estimations actually run.
    pub fn estimations(&self) -> usize {
        self.estimations
    }

    /// Exploitation rounds whose pattern had no mass under `ŵ`.
    pub fn no_mass_rounds(&self) -> usize {
        self.no_mass_rounds
    }

    pub fn cached(&self) -> &BTreeMap<SignPattern, PatternEstimate> {
        &self.cache
    }

    /// Estimated `E[v* | pattern]` under the recovered separators, cached.
    pub fn pattern_estimate(&mut self, pattern: &SignPattern) -> Result<PatternEstimate> {
        if let Some(e) = self.cache.get(pattern) {
            return Ok(*e);
        }
        let sep = self
            .separators
            .as_ref()
            .ok_or_else(|| Error::PhaseViolation("estimate requested during exploration".into()))?;
        let estimate = if let Some(v) = self.presets.get(pattern) {
            PatternEstimate::Preset(*v)
        } else {
            self.estimations += 1;
            let seed = derive_seed(self.setup.map_or(0, |s| s.seed), pattern.index() as u64);
            let region = PolytopeRegion::from_pattern(sep, pattern);
            match estimate_region_mean(&self.known, &region, self.config.n_samples, self.config.bootstrap_reps, seed) {
                Ok(e) => PatternEstimate::Estimated(e),
                Err(Error::NoMass(_)) => PatternEstimate::NoMass,
                Err(e) => return Err(e),
            }
        };
        self.cache.insert(pattern.clone(), estimate);
        Ok(estimate)
    }

    /// Writes recovered separators and per-pattern estimates as plain text.
    pub fn write_debug(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "# t_prime {}", self.t_prime);
        if let Some(sep) = &self.separators {
            for (j, w) in sep.rows().iter().enumerate() {
                let _ = writeln!(out, "w {j} {w:?}");
            }
        }
        let _ = writeln!(out, "# pattern estimate std_error accepted draws low_mass");
        for (p, e) in &self.cache {
            let bits: String = p.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
            match e {
                PatternEstimate::Estimated(r) => {
                    let _ = writeln!(
                        out,
                        "{bits} {} {} {} {} {}",
                        r.estimate, r.std_error, r.accepted, r.draws, r.low_mass
                    );
                }
                PatternEstimate::Preset(v) => {
                    let _ = writeln!(out, "{bits} {v} preset");
                }
                PatternEstimate::NoMass => {
                    let _ = writeln!(out, "{bits} no-mass");
                }
            }
        }
        let _ = writeln!(out, "# no_mass_rounds {}", self.no_mass_rounds);
        std::fs::write(path, out)?;
        Ok(())
    }

    fn finish_exploration(&mut self) -> Result<()> {
        let sep = match &self.forced {
            Some(sep) => sep.clone(),
            None => recover_separators(&self.samples, self.known.dim, self.bits)?,
        };
        self.separators = Some(sep);
        Ok(())
    }
}

fn bits_of(cardinality: usize) -> Result<usize> {
    if cardinality < 2 || !cardinality.is_power_of_two() {
        return Err(Error::invalid(
            "mask_cardinality",
            format!("{cardinality} is not 2^l for l >= 1"),
        ));
    }
    Ok(cardinality.trailing_zeros() as usize)
}

impl BuyerStrategy for EtcSimHash {
    fn name(&self) -> &str {
        "etc-simhash"
    }

    fn begin(&mut self, setup: &RunSetup) -> Result<()> {
        let bits = bits_of(setup.mask_cardinality)?;
        let t_prime = exploration_length(setup.horizon, self.known.dim, bits, self.config.delta, self.config.c)?;
        if let Some(sep) = &self.forced {
            if sep.bits() != bits || sep.dim() != self.known.dim {
                return Err(Error::invalid("separators", "forced separators do not fit the mask"));
            }
        }
        let fresh = EtcSimHash::new(self.known.clone(), self.config);
        *self = EtcSimHash {
            forced: self.forced.take(),
            presets: std::mem::take(&mut self.presets),
            ..fresh
        };
        self.setup = Some(*setup);
        self.bits = bits;
        self.t_prime = t_prime;
        if t_prime == 0 {
            self.finish_exploration()?;
        }
        Ok(())
    }

    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool> {
        let setup = self
            .setup
            .ok_or_else(|| Error::ProtocolViolation("decide before begin".into()))?;
        if self.pending.is_some() {
            return Err(Error::ProtocolViolation("decide called twice without feedback".into()));
        }
        if self.t >= setup.horizon {
            return Err(Error::ProtocolViolation(format!("round past horizon {}", setup.horizon)));
        }
        let pattern = SignPattern::from_mask(mask, self.bits)?;
        self.t += 1;
        let explore = self.t <= self.t_prime;
        let decision = if explore {
            true
        } else {
            let estimate = self.pattern_estimate(&pattern)?;
            if estimate == PatternEstimate::NoMass {
                self.no_mass_rounds += 1;
            }
            estimate.value() >= price
        };
        self.pending = Some((pattern, explore));
        Ok(decision)
    }

    fn feedback(&mut self, purchase: Option<&Purchase<'_>>) -> Result<()> {
        let (pattern, explore) = self
            .pending
            .take()
            .ok_or_else(|| Error::ProtocolViolation("feedback without decision".into()))?;
        if explore {
            let p = purchase
                .ok_or_else(|| Error::ProtocolViolation("exploration round without purchase".into()))?;
            let Item::Point(x) = p.item else {
                return Err(Error::invalid("item", "SimHash strategy needs points of the box"));
            };
            self.samples.push((x.clone(), pattern));
            if self.t == self.t_prime {
                self.finish_exploration()?;
            }
        }
        Ok(())
    }
}
