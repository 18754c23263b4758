//! Unknown horizon: restart a fixed-horizon strategy on epochs of length
//! `2T0, 4T0, 8T0, ...`, truncating the last one at the budget.

use crate::env::EnvModel;
use crate::error::{Error, Result};
use crate::protocol::{run_protocol, BuyerStrategy, MaskValue, Purchase, RunSetup, Transcript};
use crate::rng::derive_seed;

/// Epoch lengths `2^i T0` for `i >= 1` until `budget` rounds are covered.
pub fn epoch_lengths(t0: usize, budget: usize) -> Result<Vec<usize>> {
    if t0 < 2 {
        return Err(Error::invalid("t0", format!("{t0} < 2")));
    }
    let mut out = Vec::new();
    let mut used = 0usize;
    let mut len = t0;
    while used < budget {
        len = len.saturating_mul(2);
        let take = len.min(budget - used);
        out.push(take);
        used += take;
    }
    Ok(out)
}

pub type StrategyFactory = Box<dyn Fn() -> Box<dyn BuyerStrategy> + Send>;

/// Runs a fresh inner strategy per epoch.
pub struct Doubling {
    t0: usize,
    factory: StrategyFactory,
    epochs: Vec<usize>,
    epoch: usize,
    left_in_epoch: usize,
    seed: u64,
    setup: Option<RunSetup>,
    current: Option<Box<dyn BuyerStrategy>>,
}

impl Doubling {
    pub fn new(t0: usize, factory: StrategyFactory) -> Self {
        Doubling {
            t0,
            factory,
            epochs: Vec::new(),
            epoch: 0,
            left_in_epoch: 0,
            seed: 0,
            setup: None,
            current: None,
        }
    }

    pub fn epochs(&self) -> &[usize] {
        &self.epochs
    }

    fn start_epoch(&mut self, k: usize) -> Result<()> {
        let setup = self.setup.expect("begun");
        let mut inner = (self.factory)();
        inner.begin(&RunSetup {
            horizon: self.epochs[k],
            seed: derive_seed(self.seed, k as u64),
            ..setup
        })?;
        self.current = Some(inner);
        self.epoch = k;
        self.left_in_epoch = self.epochs[k];
        Ok(())
    }
}

impl BuyerStrategy for Doubling {
    fn name(&self) -> &str {
        "etc-simhash-doubling"
    }

    fn begin(&mut self, setup: &RunSetup) -> Result<()> {
        self.epochs = epoch_lengths(self.t0, setup.horizon)?;
        self.seed = setup.seed;
        self.setup = Some(*setup);
        self.start_epoch(0)
    }

    fn decide(&mut self, mask: &MaskValue, price: f64) -> Result<bool> {
        if self.left_in_epoch == 0 {
            if self.epoch + 1 >= self.epochs.len() {
                return Err(Error::ProtocolViolation("round past the budget".into()));
            }
            self.start_epoch(self.epoch + 1)?;
        }
        self.left_in_epoch -= 1;
        self.current
            .as_mut()
            .ok_or_else(|| Error::ProtocolViolation("decide before begin".into()))?
            .decide(mask, price)
    }

    fn feedback(&mut self, purchase: Option<&Purchase<'_>>) -> Result<()> {
        self.current
            .as_mut()
            .ok_or_else(|| Error::ProtocolViolation("feedback before begin".into()))?
            .feedback(purchase)
    }
}

/// Runs the doubling wrapper for `budget` rounds.
pub fn doubling_runner(
    t0: usize,
    factory: StrategyFactory,
    env: &EnvModel,
    budget: usize,
    seed: u64,
) -> Result<Transcript> {
    run_protocol(env, &mut Doubling::new(t0, factory), budget, seed)
}
