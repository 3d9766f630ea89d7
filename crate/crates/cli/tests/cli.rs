use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depkernel"))
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Runs a subcommand and returns its exit code together with the output directory.
fn run(cmd: &str, cfg: &Value, extra: &[&str]) -> (i32, TempDir) {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "config.json", cfg);
    let out = dir.path().join("out");
    let status = bin()
        .arg(cmd)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (status.status.code().unwrap(), dir)
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn chain() -> Value {
    json!({
        "kind": "finite_markov_chain",
        "states": [[0.0], [1.0]],
        "transition": [[0.9, 0.1], [0.2, 0.8]],
        "initial": [1.0, 0.0]
    })
}

fn gaussian() -> Value {
    json!({ "family": "gaussian", "sigma": 1.0 })
}

#[test]
fn generate_hill_writes_one_row_per_step() {
    let cfg = json!({ "schema": 1, "process": { "kind": "hill" }, "n": 10, "seeds": [7] });
    let (code, dir) = run("generate", &cfg, &[]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("out/trajectory_seed7.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "index,x0");
    assert_eq!(rows.len(), 11);
    let sidecar = read_json(dir.path().join("out/trajectory_seed7.json"));
    assert_eq!(sidecar["n"], 10);
    assert_eq!(sidecar["seed"], 7);
}

#[test]
fn generate_rerun_is_byte_identical() {
    let cfg = json!({ "schema": 1, "process": { "kind": "cantor" }, "n": 500, "seeds": [3, 4] });
    let (_, a) = run("generate", &cfg, &[]);
    let (_, b) = run("generate", &cfg, &[]);
    for name in ["trajectory_seed3.csv", "trajectory_seed3.json", "trajectory_seed4.csv", "trajectory_seed4.json"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn seeds_override_replaces_configured_seeds() {
    let cfg = json!({ "schema": 1, "process": { "kind": "hill" }, "n": 5, "seeds": [1] });
    let (code, dir) = run("generate", &cfg, &["--seeds", "8,9"]);
    assert_eq!(code, 0);
    assert!(!dir.path().join("out/trajectory_seed1.csv").exists());
    assert!(dir.path().join("out/trajectory_seed8.csv").exists());
    assert!(dir.path().join("out/trajectory_seed9.csv").exists());
}

#[test]
fn invalid_process_spec_exits_2() {
    let cfg = json!({ "schema": 1, "process": { "kind": "brownian" }, "n": 10, "seeds": [7] });
    assert_eq!(run("generate", &cfg, &[]).0, 2);
    let bad_chain = json!({
        "schema": 1,
        "process": {
            "kind": "finite_markov_chain",
            "states": [[0.0], [1.0]],
            "transition": [[0.5, 0.6], [0.2, 0.8]],
            "initial": [1.0, 0.0]
        },
        "n": 10,
        "seeds": [7]
    });
    assert_eq!(run("generate", &bad_chain, &[]).0, 2);
}

#[test]
fn unknown_fields_and_schema_are_rejected() {
    let extra = json!({ "schema": 1, "process": { "kind": "hill" }, "n": 10, "seeds": [7], "verbose": true });
    assert_eq!(run("generate", &extra, &[]).0, 2);
    let future = json!({ "schema": 2, "process": { "kind": "hill" }, "n": 10, "seeds": [7] });
    assert_eq!(run("generate", &future, &[]).0, 2);
    let no_seeds = json!({ "schema": 1, "process": { "kind": "hill" }, "n": 10, "seeds": [] });
    assert_eq!(run("generate", &no_seeds, &[]).0, 2);
}

#[test]
fn missing_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let output = bin()
        .args(["kme", "--config"])
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("absent.json"));
}

#[test]
fn kme_hill_converges() {
    let cfg = json!({
        "schema": 1,
        "process": { "kind": "hill" },
        "kernel": gaussian(),
        "n_grid": [10, 100, 1000],
        "seeds": [1, 2, 3]
    });
    let (code, dir) = run("kme", &cfg, &[]);
    assert_eq!(code, 0);
    let verdict = read_json(dir.path().join("out/verdict.json"));
    assert_eq!(verdict["verdict"], "converging");
    let series = fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    // Header plus three grid points for each of three seeds and the mean.
    assert_eq!(series.lines().count(), 1 + 3 * 4);
    assert!(series.lines().any(|l| l.ends_with(",mean")));
    let svg = fs::read_to_string(dir.path().join("out/series.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn kme_alternating_converges() {
    let cfg = json!({
        "schema": 1,
        "process": { "kind": "alternating" },
        "kernel": gaussian(),
        "n_grid": [10, 100, 1000],
        "seeds": [1]
    });
    let (code, dir) = run("kme", &cfg, &[]);
    assert_eq!(code, 0);
    assert_eq!(read_json(dir.path().join("out/verdict.json"))["verdict"], "converging");
}

#[test]
fn kme_threshold_override_can_fail_the_verdict() {
    let cfg = json!({
        "schema": 1,
        "process": { "kind": "hill" },
        "kernel": gaussian(),
        "n_grid": [10, 100],
        "seeds": [1]
    });
    let (code, dir) = run("kme", &cfg, &["--threshold", "1e-9"]);
    assert_eq!(code, 1);
    assert_eq!(read_json(dir.path().join("out/verdict.json"))["verdict"], "not_converging");
    assert_eq!(run("kme", &cfg, &["--threshold", "-1"]).0, 2);
}

#[test]
fn kme_log_switch_has_no_target() {
    let cfg = json!({
        "schema": 1,
        "process": { "kind": "log_switch" },
        "kernel": gaussian(),
        "n_grid": [10, 100],
        "seeds": [1]
    });
    assert_eq!(run("kme", &cfg, &[]).0, 3);
}

fn svm_config(estimator: Value) -> Value {
    json!({
        "schema": 1,
        "process": chain(),
        "kernel": gaussian(),
        "loss": { "family": "square", "output_bound": 1.0 },
        "estimator": estimator,
        "schedule": { "c": 1.0, "alpha": 0.5 },
        "n_grid": [50, 200, 800],
        "seeds": [1, 2],
        "threshold": 0.01
    })
}

#[test]
fn svm_chain_square_loss_passes() {
    let (code, dir) = run("svm", &svm_config(json!({ "kind": "svm" })), &[]);
    assert_eq!(code, 0);
    let verdict = read_json(dir.path().join("out/verdict.json"));
    assert_eq!(verdict["verdict"], "pass");
    assert!(verdict["last"].as_f64().unwrap() < verdict["first"].as_f64().unwrap());
    let risk = fs::read_to_string(dir.path().join("out/risk.csv")).unwrap();
    assert_eq!(risk.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("out/risk_mean.csv").exists());
    assert!(dir.path().join("out/risk.svg").exists());
}

#[test]
fn svm_ckme_mode_runs() {
    let estimator = json!({ "kind": "ckme", "output_kernel": gaussian() });
    let (code, dir) = run("svm", &svm_config(estimator), &[]);
    assert_eq!(code, 0);
    assert_eq!(read_json(dir.path().join("out/verdict.json"))["verdict"], "pass");
}

#[test]
fn svm_rejects_degenerate_schedule() {
    let mut cfg = svm_config(json!({ "kind": "svm" }));
    cfg["schedule"]["alpha"] = json!(0.0);
    assert_eq!(run("svm", &cfg, &[]).0, 2);
    cfg["schedule"]["alpha"] = json!(1.0);
    assert_eq!(run("svm", &cfg, &[]).0, 2);
}

#[test]
fn svm_output_is_byte_identical_across_runs() {
    let cfg = svm_config(json!({ "kind": "svm" }));
    let (_, a) = run("svm", &cfg, &[]);
    let (_, b) = run("svm", &cfg, &[]);
    for name in ["risk.csv", "risk_mean.csv", "risk.svg", "verdict.json"] {
        assert_eq!(fs::read(a.path().join("out").join(name)).unwrap(), fs::read(b.path().join("out").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn svm_log_switch_has_no_target() {
    let mut cfg = svm_config(json!({ "kind": "svm" }));
    cfg["process"] = json!({ "kind": "log_switch" });
    assert_eq!(run("svm", &cfg, &[]).0, 3);
}

#[test]
fn default_battery_passes() {
    let cfg = json!({ "schema": 1, "battery": { "instances": 20, "cross_checks": 10, "gradient_checks": 20 } });
    let (code, dir) = run("verify", &cfg, &[]);
    assert_eq!(code, 0);
    let report = read_json(dir.path().join("out/report.json"));
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
    assert!(!dir.path().join("out/failures.json").exists());
}

#[test]
fn perturbed_battery_reports_violations() {
    let cfg = json!({ "schema": 1, "battery": { "instances": 5, "cross_checks": 2, "gradient_checks": 5, "perturbation": 0.1 } });
    let (code, dir) = run("verify", &cfg, &[]);
    assert_eq!(code, 1);
    let failures = read_json(dir.path().join("out/failures.json"));
    let failures = failures.as_array().unwrap();
    assert!(failures.iter().any(|f| f["check"] == "representer_residual"));
    assert!(failures[0]["inputs"].is_array());
}

#[test]
fn empty_battery_exits_2() {
    let cfg = json!({ "schema": 1, "battery": { "instances": 0, "cross_checks": 0, "gradient_checks": 0 } });
    assert_eq!(run("verify", &cfg, &[]).0, 2);
}
