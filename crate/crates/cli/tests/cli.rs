use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmrf-geodesic"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("one line")).expect("json line")
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).expect("column");
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn analytic_metric_at_independence() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["metric", "--mu", "0", "--sigma2", "1", "--beta", "0", "--analytic", "--json"]);
    assert!(out.status.success());
    let g: Vec<Vec<f64>> = serde_json::from_value(stdout_json(&out)["g"].clone()).unwrap();
    assert_eq!(g, vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 8.0]]);
}

#[test]
fn metric_extras_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["metric", "--beta", "0.05", "--lattice", "32,32", "--inverse", "--derivatives", "--christoffel", "--json"],
    );
    assert!(out.status.success());
    let v = stdout_json(&out);
    for key in ["g", "g_inv", "dg_dsigma2", "dg_dbeta", "christoffel"] {
        assert!(v.get(key).is_some(), "{key} missing");
    }
    assert!(dir.path().join("metric.json").exists());
}

#[test]
fn analytic_entropy_is_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["entropy", "--mu", "0", "--sigma2", "1", "--beta", "0", "--analytic", "--json"]);
    assert!(out.status.success());
    let h = stdout_json(&out)["entropy"].as_f64().unwrap();
    assert!((h - 1.4189385).abs() < 1e-7);
}

#[test]
fn sample_writes_the_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sample", "--lattice", "20,24", "--seed", "3"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(text.lines().count(), 20);
    assert!(text.lines().all(|l| l.split(',').count() == 24));
}

#[test]
fn metric_accepts_a_field_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["sample", "--lattice", "32,32"]).status.success());
    let field = dir.path().join("field.csv");
    let out = run(dir.path(), &["metric", "--field", field.to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["stats"], "field");
}

#[test]
fn default_geodesic_has_201_states() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["geodesic", "--start", "0,1,0", "--tangent", "0,0,0.1", "--seed", "1", "--steps", "200", "--a", "0", "--b", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = csv_column(&dir.path().join("curve.csv"), "t");
    assert_eq!(t.len(), 201);
    assert_eq!(t[0], 0.0);
    assert_eq!(t[200], 5.0);
    let v = stdout_json(&out);
    let (gd, ed) = (v["gd"].as_f64().unwrap(), v["ed"].as_f64().unwrap());
    let beta = csv_column(&dir.path().join("curve.csv"), "beta");
    assert!(beta[200] > 0.0 && beta[200] < 1.0);
    assert!(gd >= ed && gd <= 2.0 * ed, "gd {gd} ed {ed}");
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["gd"].as_f64().unwrap(), gd);
}

#[test]
fn zero_tangent_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["geodesic", "--start", "0,1,0", "--tangent", "0,0,0", "--mode", "frozen", "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["gd"].as_f64().unwrap(), 0.0);
    assert_eq!(v["end"], serde_json::json!([0.0, 1.0, 0.0]));
}

#[test]
fn frozen_reversal_returns_home() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["reverse", "--start", "0,1,0", "--tangent", "0.1,0.1,0.05", "--mode", "frozen", "--seed", "2"]);
    assert!(out.status.success());
    let div = csv_column(&dir.path().join("divergence.csv"), "divergence");
    assert_eq!(div.len(), 201);
    assert!(div.iter().all(|d| *d < 1e-3));
    assert!(dir.path().join("forward.csv").exists() && dir.path().join("reverse.csv").exists());
}

#[test]
fn zero_tangent_reversal_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["reverse", "--start", "1,2,0.1", "--tangent", "0,0,0", "--mode", "frozen"]);
    assert!(out.status.success());
    for file in ["forward.csv", "reverse.csv"] {
        let path = dir.path().join(file);
        assert!(csv_column(&path, "mu").iter().all(|v| *v == 1.0));
        assert!(csv_column(&path, "sigma2").iter().all(|v| *v == 2.0));
        assert!(csv_column(&path, "beta").iter().all(|v| *v == 0.1));
    }
    assert!(csv_column(&dir.path().join("divergence.csv"), "divergence").iter().all(|d| *d == 0.0));
}

#[test]
fn mcmc_reversal_emits_a_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["reverse", "--start", "0,1,0", "--tangent", "0.1,0.1,0.05", "--steps", "40", "--lattice", "32,32"]);
    assert!(out.status.success());
    assert_eq!(csv_column(&dir.path().join("divergence.csv"), "divergence").len(), 41);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(dir.path(), args).status.code().unwrap();
    assert_eq!(code(&["geodesic", "--start", "0,1", "--tangent", "0,0,0"]), 2);
    assert_eq!(code(&["geodesic", "--start", "0,1,0", "--tangent", "0,0,0", "--mode", "bogus"]), 2);
    assert_eq!(code(&["nonsense"]), 2);
    assert_eq!(code(&["geodesic", "--start", "0,1,0", "--tangent", "0,0,0", "--analytic"]), 2);
    assert_eq!(code(&["geodesic", "--start", "0,-1,0", "--tangent", "0,0,0"]), 4);
    assert_eq!(code(&["metric", "--sigma2", "0"]), 4);
    assert_eq!(code(&["sample", "--lattice", "4,4"]), 4);
}

#[test]
fn divergence_writes_the_partial_curve() {
    let dir = tempfile::tempdir().unwrap();
    // Far outside the stable range the Gibbs chain explodes within a few steps.
    let out = run(dir.path(), &["geodesic", "--start", "0,1,0.3", "--tangent", "0,0,0.1", "--kernel", "gibbs", "--lattice", "32,32"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let t = csv_column(&dir.path().join("curve.csv"), "t");
    assert!(!t.is_empty() && t.len() < 201);
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["diverged_at"].as_u64().is_some());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["geodesic", "--start", "1,1,0", "--tangent", "0.05,0.05,0.05", "--seed", "9", "--steps", "50"];
    assert!(run(a.path(), &args).status.success());
    assert!(run(b.path(), &args).status.success());
    for file in ["curve.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let c = tempfile::tempdir().unwrap();
    let mut other = args;
    other[6] = "10";
    assert!(run(c.path(), &other).status.success());
    assert_ne!(fs::read(a.path().join("curve.csv")).unwrap(), fs::read(c.path().join("curve.csv")).unwrap());
}

#[test]
fn small_table_runs_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("table.json");
    fs::write(
        &cfg,
        r#"{"repeats": 2,
            "rows": [
              {"start": [0, 1, 0], "tangent": [0, 0, 0.1],
               "reference": {"end": [0, 1.203, 0.465], "gd": 0.686, "ed": 0.631}},
              {"start": [1, 1, 0], "tangent": [0.05, 0.05, 0.05]}],
            "integrator": {"steps": 40, "mcmc": {"lattice_size": [32, 32], "kernel": "metropolis"}}}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["table", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_to_string(dir.path().join("table_runs.csv")).unwrap();
    let mut lines = runs.lines();
    assert_eq!(lines.next().unwrap(), "mu_a,sigma2_a,beta_a,alpha1,alpha2,alpha3,mu_b,sigma2_b,beta_b,gd,ed,seed,diverged");
    let seeds: Vec<&str> = lines.map(|l| l.split(',').nth(11).unwrap()).collect();
    assert_eq!(seeds, ["5", "6", "7", "8"]);
    let summary = fs::read_to_string(dir.path().join("table_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert!(rows[0].contains("disagrees"));
    assert!(!rows[1].contains("disagrees"));
}
