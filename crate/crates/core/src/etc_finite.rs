//! Explore-then-commit for an arbitrary finite mask: buy unconditionally for
//! `t'` rounds to estimate `E[v* | h = i]`, then buy iff the estimate is at
//! least the price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{BuyerStrategy, MaskValue, Purchase, RunSetup};

pub const DEFAULT_MULTIPLIER: f64 = 0.05;

fn check_multiplier(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("c", format!("multiplier {c} must be positive")))
    }
}

fn cap_length(raw: f64, horizon: usize) -> usize {
    (raw.ceil() as usize).max(1).min(horizon / 2)
}

/// `ceil(c T^{3/4} n^{1/2} ln(4nT))`, capped at `floor(T/2)`.
pub fn schedule_unknown_eta(horizon: usize, n: usize, c: f64) -> Result<usize> {
    check_multiplier(c)?;
    if horizon == 0 || n == 0 {
        return Err(Error::invalid("T", "T and n must be at least 1"));
    }
    let (t, nf) = (horizon as f64, n as f64);
    Ok(cap_length(c * t.powf(0.75) * nf.sqrt() * (4.0 * nf * t).ln(), horizon))
}

/// `ceil(9 c T^{2/3} ln(4nT) / η̃)`, capped at `floor(T/2)`.
pub fn schedule_known_eta(horizon: usize, n: usize, eta_tilde: f64, c: f64) -> Result<usize> {
    check_multiplier(c)?;
    if !(eta_tilde > 0.0 && eta_tilde <= 1.0) {
        return Err(Error::invalid("eta_tilde", format!("{eta_tilde} outside (0, 1]")));
    }
    if horizon == 0 || n == 0 {
        return Err(Error::invalid("T", "T and n must be at least 1"));
    }
    let (t, nf) = (horizon as f64, n as f64);
    Ok(cap_length(
        c * 9.0 * t.powf(2.0 / 3.0) / eta_tilde * (4.0 * nf * t).ln(),
        horizon,
    ))
}

/// Running `η̂_i` and `v̂_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimates {
    pub eta_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub t_prime: usize,
    pub updates: usize,
}

impl FrequencyEstimates {
    pub fn new(n: usize, t_prime: usize) -> Self {
        FrequencyEstimates {
            eta_hat: vec![0.0; n],
            v_hat: vec![0.0; n],
            t_prime,
            updates: 0,
        }
    }

    pub fn exploring(&self) -> bool {
        self.updates < self.t_prime
    }

    /// `η̂_i += 1/t'`, `v̂_i += v/t'`.
    pub fn explore_update(&mut self, i: usize, value: f64) -> Result<()> {
        if !self.exploring() {
            return Err(Error::PhaseViolation(format!(
                "exploration update after {} rounds",
                self.t_prime
            )));
        }
        if i >= self.eta_hat.len() {
            return Err(Error::invalid("mask", format!("index {i} outside 0..{}", self.eta_hat.len())));
        }
        let w = 1.0 / self.t_prime as f64;
        self.eta_hat[i] += w;
        self.v_hat[i] += value * w;
        self.updates += 1;
        Ok(())
    }

    /// `Ẑ = v̂_i / η̂_i`, or 0 for an index never seen.
    pub fn estimate(&self, i: usize) -> f64 {
        if self.eta_hat[i] > 0.0 {
            self.v_hat[i] / self.eta_hat[i]
        } else {
            0.0
        }
    }

    /// Buys iff `Ẑ >= p`.
    pub fn exploit_decision(&self, i: usize, price: f64) -> bool {
        self.estimate(i) >= price
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    UnknownEta,
    KnownEta { eta_tilde: f64 },
    /// Exact `t'`, still capped at `floor(T/2)`.
    Fixed { t_prime: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EtcFiniteConfig {
    pub schedule: Schedule,
    pub c: f64,
}

impl Default for EtcFiniteConfig {
    fn default() -> Self {
        EtcFiniteConfig {
            schedule: Schedule::UnknownEta,
            c: DEFAULT_MULTIPLIER,
        }
    }
}

impl EtcFiniteConfig {
    pub fn exploration_length(&self, horizon: usize, n: usize) -> Result<usize> {
        match self.schedule {
            Schedule::UnknownEta => schedule_unknown_eta(horizon, n, self.c),
            Schedule::KnownEta { eta_tilde } => schedule_known_eta(horizon, n, eta_tilde, self.c),
            Schedule::Fixed { t_prime } => Ok(t_prime.min(horizon / 2)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EtcFinite {
    config: EtcFiniteConfig,
    horizon: usize,
    t: usize,
    est: Option<FrequencyEstimates>,
    pending: Option<(usize, bool)>,
}

impl EtcFinite {
    pub fn new(config: EtcFiniteConfig) -> Self {
        EtcFinite {
            config,
            horizon: 0,
            t: 0,
            est: None,
            pending: None,
        }
    }

    pub fn estimates(&self) -> Option<&FrequencyEstimates> {
        self.est.as_ref()
    }

    pub fn t_prime(&self) -> Option<usize> {
        self.est.as_ref().map(|e| e.t_prime)
    }

    /// Committed per-mask thresholds, once exploration is over.
    pub fn thresholds(&self) -> Option<Vec<f64>> {
        let est = self.est.as_ref()?;
        (!est.exploring()).then(|| (0..est.eta_hat.len()).map(|i| est.estimate(i)).collect())
    }
}

impl BuyerStrategy for EtcFinite {
    fn name(&self) -> &str {
        "etc-finite"
    }

    fn begin(&mut self, setup: &RunSetup) -> Result<()> {
        let t_prime = self
            .config
            .exploration_length(setup.horizon, setup.mask_cardinality)?;
        *self = EtcFinite::new(self.config);
        self.horizon = setup.horizon;
        self.est = Some(FrequencyEstimates::new(setup.mask_cardinality, t_prime));
        Ok(())
    }

    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool> {
        let est = self
            .est
            .as_ref()
            .ok_or_else(|| Error::ProtocolViolation("decide before begin".into()))?;
        if self.pending.is_some() {
            return Err(Error::ProtocolViolation("decide called twice without feedback".into()));
        }
        if self.t >= self.horizon {
            return Err(Error::ProtocolViolation(format!("round past horizon {}", self.horizon)));
        }
        let i = mask.index();
        if i >= est.eta_hat.len() {
            return Err(Error::invalid("mask", format!("index {i} out of range")));
        }
        self.t += 1;
        let explore = est.exploring();
        let decision = explore || est.exploit_decision(i, price);
        self.pending = Some((i, explore));
        Ok(decision)
    }

    fn feedback(&mut self, purchase: Option<&Purchase<'_>>) -> Result<()> {
        let (i, explore) = self
            .pending
            .take()
            .ok_or_else(|| Error::ProtocolViolation("feedback without decision".into()))?;
        if explore {
            let p = purchase
                .ok_or_else(|| Error::ProtocolViolation("exploration round without purchase".into()))?;
            self.est
                .as_mut()
                .expect("begun")
                .explore_update(i, p.value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_finite_env, stochastic_price_process, PriceDistribution};
    use crate::protocol::run_protocol;

    #[test]
    fn update_examples() {
        let mut e = FrequencyEstimates::new(1, 4);
        e.explore_update(0, 0.2).unwrap();
        e.explore_update(0, 0.6).unwrap();
        assert!((e.eta_hat[0] - 0.5).abs() < 1e-15);
        assert!((e.v_hat[0] - 0.2).abs() < 1e-15);

        let mut e = FrequencyEstimates::new(2, 2);
        e.explore_update(0, 0.0).unwrap();
        e.explore_update(1, 1.0).unwrap();
        assert_eq!(e.eta_hat, vec![0.5, 0.5]);
        assert_eq!(e.v_hat, vec![0.0, 0.5]);
        assert!(matches!(e.explore_update(0, 0.3), Err(Error::PhaseViolation(_))));
    }

    #[test]
    fn decision_examples() {
        let e = FrequencyEstimates {
            eta_hat: vec![0.5, 0.0],
            v_hat: vec![0.2, 0.0],
            t_prime: 2,
            updates: 2,
        };
        assert!(e.exploit_decision(0, 0.3));
        assert!(e.exploit_decision(0, 0.4));
        assert!(!e.exploit_decision(0, 0.41));
        assert!(!e.exploit_decision(1, 0.01));
    }

    #[test]
    fn unknown_schedule_examples() {
        assert_eq!(schedule_unknown_eta(16, 1, 1.0).unwrap(), 8);
        let raw = 0.02 * 1e6f64.powf(0.75) * 2f64.sqrt() * 8e6f64.ln();
        assert_eq!(schedule_unknown_eta(1_000_000, 2, 0.02).unwrap(), raw.ceil() as usize);
        assert_eq!(schedule_unknown_eta(1_000_000, 2, 0.02).unwrap(), 14217);
        assert!(schedule_unknown_eta(100, 1, 0.0).is_err());
    }

    #[test]
    fn known_schedule_examples() {
        assert_eq!(schedule_known_eta(1000, 2, 0.5, 1.0).unwrap(), 500);
        assert!(schedule_known_eta(1000, 2, 0.0, 1.0).is_err());
        let at = |eta: f64| schedule_known_eta(10_000_000, 2, eta, 0.001).unwrap();
        assert!(at(1.0) <= at(0.5) && at(0.5) <= at(0.1));
    }

    #[test]
    fn known_schedule_scales_with_horizon() {
        // Log factor held fixed: compare the power terms only.
        let base = |t: f64| 9.0 * t.powf(2.0 / 3.0);
        let ratio = base(4e6) / base(1e6);
        assert!((ratio - 4f64.powf(2.0 / 3.0)).abs() / ratio < 0.02);
        let full = |t: usize| schedule_known_eta(t, 2, 1.0, 1e-3).unwrap() as f64;
        let observed = full(4_000_000) / full(1_000_000);
        let log_adjust = (4.0 * 2.0 * 4e6f64).ln() / (4.0 * 2.0 * 1e6f64).ln();
        assert!((observed / log_adjust - 4f64.powf(2.0 / 3.0)).abs() / 2.52 < 0.02);
    }

    #[test]
    fn estimates_sum_to_one_after_exploration() {
        let env = make_finite_env(
            vec![0.1, 0.5, 0.9],
            vec![0.2, 0.3, 0.5],
            vec![0, 1, 2],
            None,
            stochastic_price_process(vec![PriceDistribution::Point { value: 0.5 }], 3, 1.0).unwrap(),
            1.0,
        )
        .unwrap();
        let mut s = EtcFinite::new(EtcFiniteConfig {
            schedule: Schedule::Fixed { t_prime: 300 },
            c: 1.0,
        });
        let tr = run_protocol(&env, &mut s, 1000, 4).unwrap();
        let est = s.estimates().unwrap();
        assert!((est.eta_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (v, e) in est.v_hat.iter().zip(&est.eta_hat) {
            assert!(*v >= 0.0 && *v <= e + 1e-12);
        }
        assert!(tr.records[..300].iter().all(|r| r.decision));
        let thr = s.thresholds().unwrap();
        for r in &tr.records[300..] {
            assert_eq!(r.decision, thr[r.mask.index()] >= r.price);
        }
    }

    #[test]
    fn unseen_mask_never_bought() {
        let env = make_finite_env(
            vec![0.4, 0.9],
            vec![0.999_999_999, 0.000_000_001],
            vec![0, 1],
            None,
            stochastic_price_process(vec![PriceDistribution::Uniform { low: 0.01, high: 1.0 }], 2, 1.0)
                .unwrap(),
            1.0,
        )
        .unwrap();
        let mut s = EtcFinite::new(EtcFiniteConfig {
            schedule: Schedule::Fixed { t_prime: 50 },
            c: 1.0,
        });
        run_protocol(&env, &mut s, 200, 0).unwrap();
        let est = s.estimates().unwrap();
        assert_eq!(est.eta_hat[1], 0.0);
        assert!(!est.exploit_decision(1, 0.01));
    }
}
