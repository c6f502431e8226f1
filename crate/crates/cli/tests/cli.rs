//! Smoke tests for each subcommand on a small scenario.

use seer_core::harness::{PredictorChoice, SimulationConfig};
use seer_core::workload::WorkloadConfig;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn small(dir: &Path) -> PathBuf {
    let mut c = SimulationConfig {
        seed: 5,
        warmup: 120,
        horizon: 20,
        categories: 3,
        predictor: PredictorChoice::SeasonalNaive,
        seasonal_period: Some(60),
        workload: WorkloadConfig {
            locations: 2,
            base_rates: vec![30.0, 20.0],
            period: 60,
            ..WorkloadConfig::default()
        },
        ..SimulationConfig::default()
    };
    c.workload.peaks.clear();
    c.fleet.servers = 6;
    c.world.training_samples = 1500;
    c.predictor_config.epochs = 2;
    c.predictor_config.window = 8;
    let path = dir.join("config.json");
    fs::write(&path, c.to_json()).unwrap();
    path
}

fn seer(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_seer")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    let out = dir.path().join("run");
    let stdout = seer(&["run", "--config", s(&config), "--scheduler", "greedy", "--out", s(&out)]).stdout;
    let summary: serde_json::Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(summary["cycles"], 20);
    for f in ["metrics.csv", "utilization.csv", "timing.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn compare_covers_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    let out = dir.path().join("cmp");
    seer(&["compare", "--config", s(&config), "--out", s(&out), "--threads", "1"]);
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let methods: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["seer_c", "seer_a", "maxflow", "origin", "gp", "greedy"]);
    for m in methods {
        assert!(out.join(m).join("metrics.csv").exists());
    }
}

#[test]
fn sweep_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    let out = dir.path().join("sweep");
    seer(&["sweep", "--config", s(&config), "--out", s(&out), "--alpha", "0,0.1", "--beta", "0.7,0.8"]);
    let rows = fs::read_to_string(out.join("sweep.csv")).unwrap();
    // 2 x 2 grid, both modes
    assert_eq!(rows.lines().count(), 1 + 8);
}

#[test]
fn train_saves_models() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    let out = dir.path().join("model");
    seer(&["train", "--config", s(&config), "--out", s(&out), "--epochs", "2", "--latent", "4"]);
    for f in ["predictor.json", "revenue_model.json", "clusters.json", "revenue_matrix.csv", "training.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(out.join("training.csv")).unwrap().lines().count(), 1 + 3);
}

#[test]
fn synth_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    let trace = dir.path().join("trace.csv");
    seer(&["synth", "--config", s(&config), "--trace", s(&trace)]);
    let out = dir.path().join("analysis");
    seer(&["analyze", "--trace", s(&trace), "--locations", "2", "--max-lag", "60", "--out", s(&out)]);
    let acf = fs::read_to_string(out.join("acf.csv")).unwrap();
    assert_eq!(acf.lines().nth(1).unwrap(), "0,1");
    assert_eq!(fs::read_to_string(out.join("correlation.csv")).unwrap().lines().count(), 1 + 4);
    assert!(out.join("volume_cdf.csv").exists());
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"categories\": 0}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_seer"))
        .args(["run", "--config", s(&path)])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
