use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buckets::{mixture_probs, update_accumulators, BucketAccumulators, MixtureProbs};
use super::grid::{build_policy_grid, PolicyGrid};
use crate::error::{Error, Result};
use crate::protocol::{BuyerStrategy, MaskValue, Purchase, RunSetup};
use crate::rng::rng_from;

pub const DEFAULT_DELTA: f64 = 0.05;
const GAMMA_MIN: f64 = 1e-6;
const GAMMA_MAX: f64 = 0.49;
const TRACE_ROUNDS: usize = 100;

/// Length of the initialization phase,
/// `ceil(sqrt(T n ln(eT/n) + ln(2/δ)))`, capped at `floor(T/2)`.
pub fn init_length(horizon: usize, n: usize, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} outside (0, 1)")));
    }
    if n == 0 || horizon < n {
        return Err(Error::invalid("n", format!("need 1 <= n <= T (n={n}, T={horizon})")));
    }
    let (t, nf) = (horizon as f64, n as f64);
    let raw = (t * nf * (std::f64::consts::E * t / nf).ln() + (2.0 / delta).ln()).sqrt();
    let tau = (raw.ceil() as usize).min(horizon / 2);
    if tau == 0 {
        return Err(Error::DegenerateHorizon(format!(
            "T={horizon} leaves no initialization round"
        )));
    }
    Ok(tau)
}

/// `sqrt(ln|V| / (2(T - τ)))`, clamped into `[1e-6, 0.49]`.
pub fn exploration_rate(log_grid_size: f64, remaining: usize) -> f64 {
    (log_grid_size / (2.0 * remaining as f64))
        .sqrt()
        .clamp(GAMMA_MIN, GAMMA_MAX)
}

/// `sqrt(ln(|V|/δ) / (2(T - τ)))`.
pub fn confidence_bonus(log_grid_size: f64, delta: f64, remaining: usize) -> f64 {
    ((log_grid_size - delta.ln()) / (2.0 * remaining as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp4VcConfig {
    pub delta: f64,
    /// Keep a per-round estimator trace for the first rounds.
    #[serde(default)]
    pub debug: bool,
}

impl Default for Exp4VcConfig {
    fn default() -> Self {
        Exp4VcConfig {
            delta: DEFAULT_DELTA,
            debug: false,
        }
    }
}

/// Both reward-estimate conventions for one exploitation round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTrace {
    pub t: usize,
    pub arm: usize,
    pub xi_bar: [f64; 2],
    /// `(b u / ξ̄[1], 0)` as printed.
    pub literal: [f64; 2],
    /// Two-arm importance weighting of the mapped reward.
    pub standard: [f64; 2],
}

#[derive(Debug, Clone)]
struct Exploit {
    grid: PolicyGrid,
    acc: BucketAccumulators,
    gamma: f64,
    bonus: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    i: usize,
    j: usize,
    arm: usize,
    probs: Option<MixtureProbs>,
}

/// Exp4.VC over the threshold-policy grid.
#[derive(Debug, Clone)]
pub struct Exp4Vc {
    config: Exp4VcConfig,
    setup: Option<RunSetup>,
    rng: ChaCha8Rng,
    tau: usize,
    t: usize,
    observations: Vec<(usize, f64)>,
    exploit: Option<Exploit>,
    pending: Option<Pending>,
    trace: Vec<EstimatorTrace>,
}

impl Exp4Vc {
    pub fn new(config: Exp4VcConfig) -> Self {
        Exp4Vc {
            config,
            setup: None,
            rng: rng_from(0),
            tau: 0,
            t: 0,
            observations: Vec::new(),
            exploit: None,
            pending: None,
            trace: Vec::new(),
        }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn grid(&self) -> Option<&PolicyGrid> {
        self.exploit.as_ref().map(|e| &e.grid)
    }

    pub fn accumulators(&self) -> Option<&BucketAccumulators> {
        self.exploit.as_ref().map(|e| &e.acc)
    }

    pub fn gamma(&self) -> Option<f64> {
        self.exploit.as_ref().map(|e| e.gamma)
    }

    pub fn trace(&self) -> &[EstimatorTrace] {
        &self.trace
    }

    /// Writes the estimator trace and the accumulator table as plain text.
    pub fn write_debug(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "# tau {}", self.tau);
        if let Some(e) = &self.exploit {
            let _ = writeln!(out, "# gamma {} bonus {}", e.gamma, e.bonus);
        }
        let _ = writeln!(out, "# t arm xi0 xi1 literal0 literal1 standard0 standard1");
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                r.t, r.arm, r.xi_bar[0], r.xi_bar[1], r.literal[0], r.literal[1], r.standard[0], r.standard[1]
            );
        }
        if let Some(e) = &self.exploit {
            let _ = writeln!(out, "# i j threshold G0 G1");
            for i in 0..e.grid.n() {
                for (j, cell) in e.acc.cells(i).iter().enumerate() {
                    let thr = e.grid.thresholds(i).get(j).copied().unwrap_or(f64::INFINITY);
                    let _ = writeln!(out, "{i} {j} {thr} {} {}", cell[0], cell[1]);
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    fn setup(&self) -> Result<&RunSetup> {
        self.setup
            .as_ref()
            .ok_or_else(|| Error::ProtocolViolation("decide before begin".into()))
    }
}

impl BuyerStrategy for Exp4Vc {
    fn name(&self) -> &str {
        "exp4vc"
    }

    fn begin(&mut self, setup: &RunSetup) -> Result<()> {
        let tau = init_length(setup.horizon, setup.mask_cardinality, self.config.delta)?;
        *self = Exp4Vc::new(self.config);
        self.setup = Some(*setup);
        self.rng = rng_from(setup.seed);
        self.tau = tau;
        Ok(())
    }

    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool> {
        let setup = *self.setup()?;
        if self.pending.is_some() {
            return Err(Error::ProtocolViolation("decide called twice without feedback".into()));
        }
        if self.t >= setup.horizon {
            return Err(Error::ProtocolViolation(format!(
                "round {} past horizon {}",
                self.t + 1,
                setup.horizon
            )));
        }
        let i = mask.index();
        if i >= setup.mask_cardinality {
            return Err(Error::invalid("mask", format!("index {i} outside 0..{}", setup.mask_cardinality)));
        }
        self.t += 1;
        let pending = match &self.exploit {
            None => {
                self.observations.push((i, price));
                let arm = usize::from(self.rng.random_bool(0.5));
                Pending {
                    i,
                    j: 0,
                    arm,
                    probs: None,
                }
            }
            Some(e) => {
                let j = e.grid.locate_bucket(i, price);
                let probs = mixture_probs(&e.grid, &e.acc, i, j, e.gamma)?;
                let arm = usize::from(self.rng.random::<f64>() < probs.xi_bar[1]);
                Pending {
                    i,
                    j,
                    arm,
                    probs: Some(probs),
                }
            }
        };
        self.pending = Some(pending);
        Ok(pending.arm == 1)
    }

    fn feedback(&mut self, purchase: Option<&Purchase<'_>>) -> Result<()> {
        let setup = *self.setup()?;
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::ProtocolViolation("feedback without decision".into()))?;
        if purchase.is_some() != (pending.arm == 1) {
            return Err(Error::ProtocolViolation("feedback does not match decision".into()));
        }
        match (&mut self.exploit, pending.probs) {
            (None, _) => {
                if self.t == self.tau {
                    let grid = build_policy_grid(&self.observations, setup.mask_cardinality)?;
                    let remaining = setup.horizon - self.tau;
                    let gamma = exploration_rate(grid.log_grid_size(), remaining);
                    let bonus = confidence_bonus(grid.log_grid_size(), self.config.delta, remaining);
                    self.exploit = Some(Exploit {
                        acc: BucketAccumulators::new(&grid),
                        grid,
                        gamma,
                        bonus,
                    });
                }
            }
            (Some(e), Some(probs)) => {
                let h = setup.value_cap;
                let utility = purchase.map_or(0.0, |p| p.utility);
                let reward = ((utility + h) / (2.0 * h)).clamp(0.0, 1.0);
                update_accumulators(&mut e.acc, pending.i, pending.j, pending.arm, reward, &probs, e.gamma, e.bonus)?;
                if self.config.debug && self.trace.len() < TRACE_ROUNDS {
                    let mut standard = [0.0; 2];
                    standard[pending.arm] = reward / probs.xi_bar[pending.arm];
                    self.trace.push(EstimatorTrace {
                        t: self.t,
                        arm: pending.arm,
                        xi_bar: probs.xi_bar,
                        literal: [utility * pending.arm as f64 / probs.xi_bar[1], 0.0],
                        standard,
                    });
                }
            }
            (Some(_), None) => unreachable!("exploitation decisions carry mixture probabilities"),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_finite_env, stochastic_price_process, PriceDistribution};
    use crate::oracle::regret;
    use crate::protocol::{run_protocol, AlwaysBuy, NeverBuy};

    #[test]
    fn init_length_examples() {
        // Formula evaluated independently of the implementation.
        let expected = (100.0 * (100.0 * std::f64::consts::E).ln() + 4f64.ln()).sqrt().ceil();
        assert_eq!(expected, 24.0);
        assert_eq!(init_length(100, 1, 0.5).unwrap(), 24);
        assert_eq!(init_length(4, 4, 0.5).unwrap(), 2);
        assert!(matches!(init_length(1, 1, 0.5), Err(Error::DegenerateHorizon(_))));
        assert!(matches!(init_length(100, 1, 1.0), Err(Error::InvalidArgument { .. })));
        assert!(matches!(init_length(100, 1, 0.0), Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn gamma_example() {
        let g = exploration_rate(6f64.ln(), 300);
        assert!((g - (6f64.ln() / 600.0).sqrt()).abs() < 1e-15);
        assert!((g - 0.0546).abs() < 1e-4);
    }

    fn setup(horizon: usize, n: usize, seed: u64) -> RunSetup {
        RunSetup {
            horizon,
            value_cap: 1.0,
            mask_cardinality: n,
            seed,
        }
    }

    #[test]
    fn initialization_buys_half_the_time() {
        let mut s = Exp4Vc::new(Exp4VcConfig::default());
        // Large T so that tau exceeds 10,000.
        s.begin(&setup(10_000_000, 1, 3)).unwrap();
        assert!(s.tau() >= 10_000);
        let item = crate::protocol::Item::FiniteId(0);
        let mut buys = 0;
        for _ in 0..10_000 {
            let b = s.decide(&MaskValue::Index(0), 0.5).unwrap();
            buys += usize::from(b);
            let purchase = Purchase {
                item: &item,
                value: 0.5,
                utility: 0.0,
            };
            s.feedback(b.then_some(&purchase)).unwrap();
        }
        let rate = buys as f64 / 10_000.0;
        assert!((rate - 0.5).abs() < 0.05, "{rate}");
    }

    #[test]
    fn decide_past_horizon_is_protocol_violation() {
        let mut s = Exp4Vc::new(Exp4VcConfig::default());
        s.begin(&setup(4, 1, 0)).unwrap();
        let item = crate::protocol::Item::FiniteId(0);
        for _ in 0..4 {
            let b = s.decide(&MaskValue::Index(0), 0.5).unwrap();
            let purchase = Purchase {
                item: &item,
                value: 0.5,
                utility: 0.0,
            };
            s.feedback(b.then_some(&purchase)).unwrap();
        }
        assert!(matches!(
            s.decide(&MaskValue::Index(0), 0.5),
            Err(Error::ProtocolViolation(_))
        ));
    }

    #[test]
    fn beats_trivial_baselines_on_two_items() {
        let env = make_finite_env(
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0, 1],
            None,
            stochastic_price_process(
                vec![PriceDistribution::Uniform { low: 0.0, high: 1.0 }],
                2,
                1.0,
            )
            .unwrap(),
            1.0,
        )
        .unwrap();
        let (mut ours, mut always, mut never) = (0.0, 0.0, 0.0);
        for seed in 0..50 {
            let mut s = Exp4Vc::new(Exp4VcConfig::default());
            ours += regret(&run_protocol(&env, &mut s, 5000, seed).unwrap(), &env).unwrap().total();
            always += regret(&run_protocol(&env, &mut AlwaysBuy, 5000, seed).unwrap(), &env)
                .unwrap()
                .total();
            never += regret(&run_protocol(&env, &mut NeverBuy, 5000, seed).unwrap(), &env)
                .unwrap()
                .total();
        }
        assert!(ours < always && ours < never, "{ours} vs {always}, {never}");
    }

    #[test]
    fn debug_trace_records_both_conventions() {
        let env = make_finite_env(
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0, 1],
            None,
            stochastic_price_process(
                vec![PriceDistribution::Uniform { low: 0.0, high: 1.0 }],
                2,
                1.0,
            )
            .unwrap(),
            1.0,
        )
        .unwrap();
        let mut s = Exp4Vc::new(Exp4VcConfig {
            debug: true,
            ..Default::default()
        });
        run_protocol(&env, &mut s, 2000, 1).unwrap();
        assert_eq!(s.trace().len(), TRACE_ROUNDS);
        for r in s.trace() {
            assert_eq!(r.literal[1], 0.0);
            assert_eq!(r.standard[1 - r.arm], 0.0);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp4.txt");
        s.write_debug(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("# i j threshold G0 G1"));
    }
}
