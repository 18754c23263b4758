use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_masked-auction");

const CONFIG: &str = r#"{
  "env": {
    "family": "finite",
    "values": [0.1, 0.5, 0.3, 0.9],
    "probs": [0.25, 0.25, 0.25, 0.25],
    "mask_map": [0, 0, 1, 1],
    "prices": { "type": "stochastic", "per_mask": [{ "kind": "uniform", "low": 0.0, "high": 1.0 }] }
  },
  "strategy": { "id": "etc-finite" },
  "horizons": [200, 400, 800, 1600],
  "replicates": 3,
  "seed_base": 9
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn simulate(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec!["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_outputs_and_fit_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), CONFIG, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in ["rounds.csv", "runs.csv", "summary.csv", "fit.txt", "regret.dat", "metadata.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = run(&["fit", "--summary", out.join("summary.csv").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("slope "));
}

#[test]
fn rounds_csv_recomputes_cumulative_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), CONFIG, &[]).status.success());
    let out = dir.path().join("out");
    let rounds = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    let mut lines = rounds.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,t,mask,price,decision,utility,oracle_decision,regret_contribution,cum_regret"
    );
    let mut finals: Vec<(usize, f64)> = Vec::new();
    let mut current: Option<usize> = None;
    let mut running = 0.0f64;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let run_id: usize = f[0].parse().unwrap();
        if current != Some(run_id) {
            current = Some(run_id);
            running = 0.0;
            finals.push((run_id, 0.0));
        }
        running += f[7].parse::<f64>().unwrap();
        assert_eq!(running, f[8].parse::<f64>().unwrap(), "run {run_id}, t {}", f[1]);
        finals.last_mut().unwrap().1 = running;
    }
    assert_eq!(finals.len(), 4 * 3);

    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    let mut by_horizon: Vec<(usize, Vec<f64>)> = Vec::new();
    for (line, &(run_id, fin)) in runs.lines().skip(1).zip(&finals) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<usize>().unwrap(), run_id);
        assert_eq!(f[4].parse::<f64>().unwrap(), fin);
        let t: usize = f[1].parse().unwrap();
        match by_horizon.last_mut() {
            Some((h, v)) if *h == t => v.push(fin),
            _ => by_horizon.push((t, vec![fin])),
        }
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    for (line, (t, values)) in summary.lines().skip(1).zip(&by_horizon) {
        let f: Vec<&str> = line.split(',').collect();
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        assert_eq!(f[0].parse::<usize>().unwrap(), *t);
        assert_eq!(f[1].parse::<f64>().unwrap(), mean);
        assert_eq!(f[2].parse::<f64>().unwrap(), (var / k).sqrt());
        assert_eq!(f[3], "3");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), CONFIG, &[]).status.success());
    assert!(simulate(b.path(), CONFIG, &["--parallelism", "2"]).status.success());
    for f in ["rounds.csv", "runs.csv", "summary.csv"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn seed_override_changes_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), CONFIG, &[]).status.success());
    assert!(simulate(b.path(), CONFIG, &["--seed-base", "10"]).status.success());
    let x = std::fs::read(a.path().join("out/runs.csv")).unwrap();
    let y = std::fs::read(b.path().join("out/runs.csv")).unwrap();
    assert!(x != y);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_field = CONFIG.replace("[200, 400, 800, 1600]", "[400, 200]");
    let o = simulate(dir.path(), &bad_field, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizons"));

    let unknown = CONFIG.replace("etc-finite", "greedy");
    assert_eq!(simulate(dir.path(), &unknown, &[]).status.code(), Some(2));

    let keyed = CONFIG.replace(r#""type": "stochastic","#, r#""type": "stochastic", "keyed_by": "item","#);
    let o = simulate(dir.path(), &keyed, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prices.keyed_by"));

    let o = run(&["simulate", "--config", "/nonexistent.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_with_too_few_points_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    std::fs::write(&path, "T,mean_regret,stderr,replicates\n100,5,0,1\n1000,-1,0,1\n").unwrap();
    let o = run(&["fit", "--summary", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
