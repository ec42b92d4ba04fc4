use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hxai(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hxai"))
        .arg("--workdir")
        .arg(dir)
        .args(args)
        .env_remove("HXAI_SEED")
        .env_remove("HXAI_TOKEN")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = hxai(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn credit_with_model(dir: &Path) {
    ok(dir, &["ingest", "--id", "gc", "--german-credit"]);
    ok(
        dir,
        &["train", "--name", "lr", "--kind", "logistic", "--data", "gc", "--test-fraction", "0.3", "--split-seed", "1"],
    );
}

#[test]
fn usage_errors_exit_two_and_domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    credit_with_model(dir.path());

    let missing_metric = hxai(dir.path(), &["rate", "--data", "gc", "--model", "lr"]);
    assert_eq!(missing_metric.status.code(), Some(2));

    let wrs_with_transform = hxai(
        dir.path(),
        &["rate", "--data", "gc", "--model", "lr", "--metric", "wrs", "--scale", "0.5"],
    );
    assert_eq!(wrs_with_transform.status.code(), Some(2));

    let die_without_treatment = hxai(dir.path(), &["rate", "--data", "gc", "--model", "lr", "--metric", "die"]);
    assert_eq!(die_without_treatment.status.code(), Some(2));

    let unknown_feature = hxai(
        dir.path(),
        &["explain", "pdp", "--data", "gc", "--model", "lr", "--feature", "Shoe size"],
    );
    assert_eq!(unknown_feature.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&unknown_feature.stderr).unwrap();
    assert!(err["error"]["kind"].is_string());

    let again = hxai(dir.path(), &["ingest", "--id", "gc", "--german-credit"]);
    assert_eq!(again.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&again.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "Conflict");

    let help = hxai(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn pdp_writes_twenty_grid_points_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    credit_with_model(dir.path());
    ok(
        dir.path(),
        &["explain", "pdp", "--data", "gc", "--model", "lr", "--feature", "Credit amount", "--svg"],
    );
    let out = dir.path().join("out");
    let pdp = read_json(&out.join("pdp.json"));
    assert_eq!(pdp["kind"], "pdp");
    let grid = pdp["values"]["result"]["grid"].as_array().expect("grid");
    assert_eq!(grid.len(), 20);
    assert!(fs::read_to_string(out.join("pdp.svg")).unwrap().starts_with("<svg"));

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["pdp.json", "pdp.svg"]);
    assert!(manifest["versions"]["hxai-core"].is_string());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    credit_with_model(dir.path());
    let args = |out: &str| {
        vec![
            "--out".to_string(),
            out.to_string(),
            "rate".into(),
            "--data".into(),
            "gc".into(),
            "--model".into(),
            "lr".into(),
            "--metric".into(),
            "die".into(),
            "--treatment".into(),
            "Credit amount".into(),
            "--scale".into(),
            "0.5".into(),
            "--protected".into(),
            "Sex".into(),
        ]
    };
    for out in ["a", "b"] {
        let a = args(out);
        ok(dir.path(), &a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let first = fs::read(dir.path().join("a/rating.json")).unwrap();
    let second = fs::read(dir.path().join("b/rating.json")).unwrap();
    assert_eq!(first, second);
    let ha = read_json(&dir.path().join("a/manifest.json"))["config_hash"].clone();
    let hb = read_json(&dir.path().join("b/manifest.json"))["config_hash"].clone();
    assert_eq!(ha, hb);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    credit_with_model(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_hxai"))
        .arg("--workdir")
        .arg(dir.path())
        .args(["rate", "--data", "gc", "--model", "lr", "--metric", "wrs", "--protected", "Sex"])
        .env("HXAI_SEED", "17")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["seed"], 17);
    let rating = read_json(&dir.path().join("out/rating.json"));
    assert_eq!(rating["metadata"]["seed"], 17);
}

#[test]
fn jack_scenario_writes_four_artifacts_and_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let listing = ok(dir.path(), &["scenario", "list"]);
    assert!(String::from_utf8_lossy(&listing.stdout).contains("jack"));

    ok(dir.path(), &["scenario", "run", "jack"]);
    let out = dir.path().join("out");
    let kinds: Vec<String> = (1..=4)
        .map(|i| read_json(&out.join(format!("artifact-{i:02}.json")))["kind"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds, ["rating", "shap", "counterfactual", "counterfactual"]);
    assert!(!out.join("artifact-05.json").exists());
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["sections"].as_array().unwrap().len(), 4);
    assert!(!fs::read_to_string(out.join("report.txt")).unwrap().is_empty());
}

#[test]
fn perturb_drops_every_period() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest", "--id", "mkt", "--synthetic-market", "--days", "100"]);
    ok(
        dir.path(),
        &["perturb", "--data", "mkt", "--kind", "drop-to-zero", "--period", "10", "--offset", "3", "--register", "mkt0"],
    );
    let text = fs::read_to_string(dir.path().join("out/perturbed.csv")).unwrap();
    let mut rdr = csv_rows(&text);
    let header = rdr.remove(0);
    let close = header.iter().position(|h| h == "close").expect("close column");
    let zeros = rdr.iter().filter(|r| r[close].parse::<f64>().unwrap() == 0.0).count();
    // 100 days per ticker, one zero every 10 from offset 3, 6 tickers.
    assert_eq!(zeros, 60);
    assert!(dir.path().join("datasets/mkt0/record.json").exists());
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn forecast_rating_adds_the_requested_perturbation_arm() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest", "--id", "mkt", "--synthetic-market"]);
    ok(dir.path(), &["train", "--name", "ar5", "--kind", "autoregressive", "--data", "mkt", "--config", r#"{"order":5}"#]);
    ok(dir.path(), &["rate", "--data", "mkt", "--model", "ar5", "--metric", "die", "--perturbation", "drop-to-zero"]);
    let rating = read_json(&dir.path().join("out/rating.json"));
    let scores = &rating["values"]["rating"]["scores"];
    assert!(scores["ar5"].is_f64() && scores["biased_baseline"].is_f64());
}
