//! Brute-force equivalence and invariant checks bundled for the CLI.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{make_finite_env, stochastic_price_process, Density, KnownDistribution, PriceDistribution, Valuation};
use crate::error::Result;
use crate::etc_simhash::{estimate_region_mean, recover_separators, simhash, Halfspace, PolytopeRegion, Separators};
use crate::exp4vc::checks::{fine_axes, grid_behaviours, is_shattered, labelings};
use crate::exp4vc::{build_policy_grid, mixture_probs, update_accumulators, BucketAccumulators, NaiveWeights};
use crate::oracle::{regret, OracleStrategy};
use crate::protocol::run_protocol;
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Random instance with `n <= 3` and at most `max_thresholds` entries per `V_i`.
fn random_observations(rng: &mut ChaCha8Rng, max_thresholds: usize) -> (usize, Vec<(usize, f64)>) {
    let n = rng.random_range(1..=3);
    let mut obs = Vec::new();
    for i in 0..n {
        let k = rng.random_range(0..max_thresholds);
        let mut prices: Vec<u32> = Vec::new();
        while prices.len() < k {
            let p = rng.random_range(1..=10);
            if !prices.contains(&p) {
                prices.push(p);
            }
        }
        obs.extend(prices.into_iter().map(|p| (i, p as f64 / 10.0)));
    }
    (n, obs)
}

/// Largest gap between bucketized and enumerated mixture probabilities.
pub fn exp4_equivalence_gap(instances: usize, rounds: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (n, obs) = random_observations(&mut rng, 4);
        let grid = build_policy_grid(&obs, n)?;
        let mut acc = BucketAccumulators::new(&grid);
        let mut naive = NaiveWeights::new(&grid)?;
        let gamma = rng.random_range(0.01..0.3);
        let bonus = rng.random_range(0.0..0.2);
        for _ in 0..rounds {
            let i = rng.random_range(0..n);
            let p = rng.random_range(0..=11) as f64 / 10.0;
            let j = grid.locate_bucket(i, p);
            let fast = mixture_probs(&grid, &acc, i, j, gamma)?;
            let slow = naive.mixture_probs(i, p, gamma);
            for b in 0..2 {
                worst = worst.max((fast.xi_bar[b] - slow.xi_bar[b]).abs());
            }
            let arm = usize::from(rng.random::<f64>() < fast.xi_bar[1]);
            let reward = rng.random::<f64>();
            update_accumulators(&mut acc, i, j, arm, reward, &fast, gamma, bonus)?;
            naive.update(i, p, arm, reward, &slow, gamma, bonus);
        }
    }
    Ok(worst)
}

/// Every placement of `n + 1` contexts on `n` indices, prices from `levels`,
/// misses at least one labeling.
pub fn no_shattered_extra_context(n: usize, levels: &[f64]) -> bool {
    let k = n + 1;
    let mut idx = vec![0usize; k];
    let mut lv = vec![0usize; k];
    loop {
        let contexts: Vec<(usize, f64)> = (0..k).map(|c| (idx[c], levels[lv[c]])).collect();
        if is_shattered(n, &contexts, 1.0) {
            return false;
        }
        // odometer over (index, level) per context
        let mut c = 0;
        loop {
            if c == k {
                return true;
            }
            lv[c] += 1;
            if lv[c] < levels.len() {
                break;
            }
            lv[c] = 0;
            idx[c] += 1;
            if idx[c] < n {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

fn unit_contexts_shattered(n: usize) -> bool {
    let contexts: Vec<(usize, f64)> = (0..n).map(|i| (i, 0.5)).collect();
    labelings(&contexts, &vec![vec![0.0, 1.0]; n]).len() == 1 << n
}

/// Grid behaviours equal fine-sweep behaviours on random tuples.
pub fn representativeness_holds(cases: usize, seed: u64) -> bool {
    let mut rng = rng_from(seed);
    (0..cases).all(|_| {
        let n = rng.random_range(1..=3);
        let tau = rng.random_range(1..=5);
        let contexts: Vec<(usize, f64)> = (0..tau)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..=100) as f64 / 100.0))
            .collect();
        let grid = build_policy_grid(&contexts, n).expect("valid contexts");
        grid_behaviours(&grid, &contexts) == labelings(&contexts, &fine_axes(n, 0.01, 1.0))
    })
}

fn recovery_exact(runs: usize, seed: u64) -> Result<bool> {
    let mut rng = rng_from(seed);
    for _ in 0..runs {
        let truth = Separators::random(5, 3, &mut rng)?;
        let samples: Vec<_> = (0..200)
            .map(|_| {
                let x = Density::Uniform.sample(5, &mut rng);
                let y = simhash(&truth, &x)?;
                Ok((x, y))
            })
            .collect::<Result<_>>()?;
        let sep = recover_separators(&samples, 5, 3)?;
        for (x, y) in &samples {
            if simhash(&sep, x)? != *y {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn region_closed_forms(seed: u64) -> Result<(bool, String)> {
    let known = KnownDistribution::new(
        2,
        Density::Uniform,
        Valuation::Linear {
            weights: vec![1.0, 0.0],
            bias: 0.0,
        },
        1.0,
    )?;
    let triangle = PolytopeRegion::new(
        2,
        vec![Halfspace {
            normal: vec![1.0, 1.0],
            offset: -1.0,
            keep_nonnegative: true,
        }],
    )?;
    let boxed = estimate_region_mean(&known, &PolytopeRegion::whole_box(2), 20_000, 200, seed)?;
    let tri = estimate_region_mean(&known, &triangle, 20_000, 200, seed + 1)?;
    let ok = (boxed.estimate - 0.5).abs() <= 4.0 * boxed.std_error
        && (tri.estimate - 2.0 / 3.0).abs() <= 4.0 * tri.std_error;
    Ok((ok, format!("box {:.5}, triangle {:.5}", boxed.estimate, tri.estimate)))
}

fn oracle_self_regret() -> Result<f64> {
    let env = make_finite_env(
        vec![0.1, 0.4, 0.9],
        vec![0.3, 0.3, 0.4],
        vec![0, 0, 1],
        None,
        stochastic_price_process(vec![PriceDistribution::Uniform { low: 0.0, high: 1.0 }], 2, 1.0)?,
        1.0,
    )?;
    let tr = run_protocol(&env, &mut OracleStrategy::new(&env), 2000, 1)?;
    Ok(regret(&tr, &env)?.total())
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> SelftestCheck {
    SelftestCheck {
        name,
        passed,
        detail: detail.into(),
    }
}

pub fn run_selftest() -> Result<Vec<SelftestCheck>> {
    let gap = exp4_equivalence_gap(100, 50, 1)?;
    let unit = (1..=4).all(unit_contexts_shattered);
    let extra = (1..=3).all(|n| no_shattered_extra_context(n, &[0.3, 0.6]));
    let (region_ok, region_detail) = region_closed_forms(7)?;
    let self_regret = oracle_self_regret()?;
    Ok(vec![
        check("exp4vc-bucketized-vs-naive", gap < 1e-9, format!("max gap {gap:.3e}")),
        check("shattering", unit && extra, format!("unit contexts {unit}, n+1 contexts {extra}")),
        check("grid-representativeness", representativeness_holds(200, 3), "200 random tuples"),
        check("separator-recovery", recovery_exact(20, 5)?, "20 runs, d=5, l=3"),
        check("region-mean", region_ok, region_detail),
        check("oracle-self-regret", self_regret == 0.0, format!("regret {self_regret}")),
    ])
}
