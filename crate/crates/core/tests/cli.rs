use std::path::Path;
use std::process::{Command, Output};

use mobile_charger::harness::{records, Config};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mobile-charger"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn CLI")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn ik_prints_joint_angles() {
    let o = run(&["ik", "1", "-2", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["theta1"].is_f64() && v["theta2"].is_f64() && v["theta3"].is_f64());
}

#[test]
fn fk_round_trips_ik() {
    let o = run(&["ik", "1", "-2", "5"]);
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let args: Vec<String> =
        ["theta1", "theta2", "theta3"].iter().map(|k| j[k].as_f64().unwrap().to_string()).collect();
    let o = run(&["fk", &args[0], &args[1], &args[2]]);
    assert_eq!(code(&o), 0);
    let p: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for (k, want) in [("x", 1.0), ("y", -2.0), ("z", 5.0)] {
        assert!((p[k].as_f64().unwrap() - want).abs() < 1e-9, "{p}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["bogus-subcommand"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["ik", "50", "0", "5"])), 2);
    assert_eq!(code(&run(&["analyze", "--input", "/nonexistent/records.json"])), 2);
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"no_such_section": 1}"#).unwrap();
    assert_eq!(code(&run(&["--config", p.to_str().unwrap(), "ik", "0", "0", "5"])), 1);
}

#[test]
fn default_config_parses_back() {
    let o = run(&["--print-default-config"]);
    assert_eq!(code(&o), 0);
    let cfg = Config::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, Config::default());
}

fn small_config(dir: &Path) -> String {
    let mut c = Config::default();
    c.tactile.n_per_class = 6;
    c.train.epochs = 2;
    c.experiment.trials_per_omega = 4;
    let p = dir.join("small.json");
    std::fs::write(&p, c.to_json_pretty()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = run(&["--config", &cfg, "--seed", "7", "--format", "csv", "simulate"]);
    let b = run(&["--config", &cfg, "--seed", "7", "--format", "csv", "simulate"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let recs = records::read_csv(a.stdout.as_slice()).unwrap();
    assert_eq!(recs.len(), 20);
    assert!(recs.iter().filter(|r| r.outcome.success).all(|r| r.gate.is_some()));
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.json");
    let o = run(&["--out", out.to_str().unwrap(), "simulate", "--no-classify"]);
    assert_eq!(code(&o), 0);
    let o = run(&["analyze", "--input", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["trials"], 100);
}

#[test]
fn tactile_train_classify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("v.csv");
    let model = dir.path().join("v.json");
    let d = data.to_str().unwrap();
    let m = model.to_str().unwrap();
    let o = run(&["--out", d, "synth-tactile", "--kind", "vertical", "--n-per-class", "8", "--sigma", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["--out", m, "train-classifier", "--kind", "vertical", "--data", d, "--epochs", "15"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["classify", "--model", m, "--frames", d]);
    assert_eq!(code(&o), 0);
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.get("gate").is_none()));
    let wrong_kind = run(&["train-classifier", "--kind", "angular", "--data", d]);
    assert_eq!(code(&wrong_kind), 1);
}

#[test]
fn eval_detection_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("det.json");
    std::fs::write(
        &p,
        r#"{"predictions":[{"bbox":{"x1":0,"y1":0,"x2":10,"y2":10},"confidence":0.9}],
            "ground_truth":[{"x1":0,"y1":0,"x2":10,"y2":10},{"x1":50,"y1":50,"x2":60,"y2":60}]}"#,
    )
    .unwrap();
    let o = run(&["eval-detection", "--input", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["precision"], 1.0);
    assert_eq!(v["recall"], 0.5);
    assert_eq!(code(&run(&["eval-detection", "--input", p.to_str().unwrap(), "--iou", "2"])), 1);
}
