use std::path::Path;
use std::process::{Command, Output};

fn dike(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dike"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run dike")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_config(dir: &Path, versions: &str) {
    let text = format!(
        r#"{{
  "model_versions": {versions},
  "tide_gauge": {{"path": "record.csv", "format": "high-frequency"}},
  "sampling": {{"n_sow": 150, "seed": 3}},
  "sea_level": {{"n_hindcasts": 3000, "min_accepted": 100}},
  "surge": {{"mcmc": {{"iterations": 8000}}}},
  "sensitivity": {{"n_base": 64, "oat_points": 5}},
  "output_dir": "out"
}}"#
    );
    std::fs::write(dir.join("config.json"), text).unwrap();
}

#[test]
fn optimize_defaults_to_the_point_value_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&dike(&["optimize", "--seed", "1", "--out", "o"], dir.path()));
    assert_eq!(v["optimal_height_m"], 2.35);
    assert_eq!(v["version"], "baseline");
    assert!(dir.path().join("o/baseline/cost_curve.csv").exists());
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dike(&["optimize"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"sampling": {"seed": 1}, "bogus": 1}"#).unwrap();
    assert_eq!(dike(&["optimize", "--config", "c.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_record_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"["slr_upgraded"]"#);
    let out = dike(&["fit-slr", "--config", "config.json"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stages_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let synth = json(&dike(
        &["synth", "--out", "record.csv", "--seed", "4", "--cadence-hours", "12"],
        p,
    ));
    assert_eq!(synth["truth"], "record.csv.truth.json");
    write_config(p, r#"["baseline", "parametric", "slr_upgraded", "surge_upgraded"]"#);

    let fit = json(&dike(&["fit-gev", "--config", "config.json"], p));
    assert_eq!(fit["n_maxima"], 137);
    let slr = json(&dike(&["fit-slr", "--config", "config.json"], p));
    assert_eq!(slr["reference_year"], 2016);
    json(&dike(&["calibrate-slr", "--config", "config.json"], p));
    let mcmc = json(&dike(&["mcmc", "--config", "config.json"], p));
    assert_eq!(mcmc["samples"].as_u64().unwrap() + mcmc["burn_in"].as_u64().unwrap(), 8000);
    let ens = json(&dike(
        &["ensemble", "--config", "config.json", "--version", "surge_upgraded"],
        p,
    ));
    assert_eq!(ens["n_sow"], 150);
    let sat = json(&dike(&["satisfice", "--config", "config.json", "--version", "parametric"], p));
    assert!(sat["two_objective"]["fraction"].as_f64().unwrap() > 0.0);
    let t = json(&dike(
        &["tradeoffs", "--config", "config.json", "--version", "slr_upgraded"],
        p,
    ));
    assert!(t["optimal_height_m"].as_f64().unwrap() >= 2.35);
    let s = json(&dike(&["sensitivity", "--config", "config.json", "--version", "baseline"], p));
    assert!(s["objectives"]["investment"]["first"]["k"].as_f64().unwrap() > 0.95);

    let a = dike(&["run", "--config", "config.json", "--out", "t1", "--threads", "1"], p);
    let b = dike(&["run", "--config", "config.json", "--out", "t3", "--threads", "3"], p);
    assert_eq!(json(&a), json(&b));
    for file in [
        "summary.json",
        "slr_posterior.csv",
        "mcmc_chain.csv",
        "surge_upgraded/sensitivity_indices.csv",
    ] {
        let x = std::fs::read(p.join("t1").join(file)).unwrap();
        let y = std::fs::read(p.join("t3").join(file)).unwrap();
        assert!(x == y, "{file} differs between thread counts");
    }
}
