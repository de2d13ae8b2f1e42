use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const LINEAR: &str = r#"{
    "problem": {"horizon": 1.0, "boundary": {"kind": "linear", "intercept": 1.0, "slope": 0.0}},
    "methods": ["closed_form", "explicit", "timesplit"]
}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bcross"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn eval_json_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "problem": {"horizon": 1.0, "boundary": {"kind": "sinusoid", "amplitude": 0.5, "angular_frequency": 3.0, "offset": 1.0}},
        "methods": ["explicit", "path_mc"],
        "controls": {"mc": {"n_paths": 2000, "n_steps": 32}}
    }"#;
    let a = stdout(&run(dir.path(), config, &["eval", "--seed", "3"]));
    let b = stdout(&run(dir.path(), config, &["eval", "--seed", "3"]));
    assert_eq!(a, b);
    let c = stdout(&run(dir.path(), config, &["eval", "--seed", "4"]));
    assert_ne!(a, c);
    let report: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 2);
    assert_eq!(report["config"]["seed"], 3);
}

#[test]
fn eval_csv_linear_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&run(dir.path(), LINEAR, &["eval", "--format", "csv"]));
    let rows = csv_rows(&text);
    assert_eq!(rows[0][..3], ["method", "value", "error"]);
    let exact = 0.3173105078629141;
    for row in &rows[1..] {
        let v: f64 = row[1].parse().unwrap();
        assert!((v - exact).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.csv");
    let out = run(dir.path(), LINEAR, &["compare", "--format", "csv", "--out", target.to_str().unwrap()]);
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    assert!(text.starts_with("method,value,error,delta_vs_reference,sigmas\n"));
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad_sigma = LINEAR.replace(r#""horizon": 1.0,"#, r#""horizon": 1.0, "sigma": -1.0,"#);
    let out = run(dir.path(), &bad_sigma, &["eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/problem/sigma"));

    let unknown = LINEAR.replace(r#""horizon""#, r#""horizn""#);
    assert_eq!(run(dir.path(), &unknown, &["eval"]).status.code(), Some(2));

    let typo = LINEAR.replace(r#""methods""#, r#""controls": {"mc": {"n_path": 10}}, "methods""#);
    let out = run(dir.path(), &typo, &["eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/controls/mc"));

    let no_methods = r#"{"problem": {"horizon": 1.0, "boundary": {"kind": "constant", "level": 1.0}}, "methods": []}"#;
    assert_eq!(run(dir.path(), no_methods, &["eval"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), no_methods, &["compare"]).status.code(), Some(2));

    let curved = LINEAR.replace(r#"{"kind": "linear", "intercept": 1.0, "slope": 0.0}"#, r#"{"kind": "polynomial", "coefficients": [1.0, 0.0, 1.0]}"#);
    assert_eq!(run(dir.path(), &curved, &["eval"]).status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_bcross"))
        .args(["eval", "--config", "/nonexistent/run.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "problem": {"horizon": 1.0, "boundary": {"kind": "sinusoid", "amplitude": 0.5, "angular_frequency": 3.0, "offset": 1.0}},
        "methods": ["explicit"],
        "controls": {"quad": {"max_intervals": 1, "tol": 1e-14}}
    }"#;
    let out = run(dir.path(), config, &["eval"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_linear_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "problem": {"horizon": 1.0, "boundary": {"kind": "linear", "intercept": 1.0, "slope": 0.0}},
        "methods": ["explicit"],
        "sweep": {"parameters": [
            {"path": "problem.boundary.slope", "values": [0.0, 0.5, 1.0]},
            {"path": "problem.boundary.intercept", "values": [0.5, 1.0, 2.0]}
        ]}
    }"#;
    let rows = csv_rows(&stdout(&run(dir.path(), config, &["sweep", "--format", "csv"])));
    assert_eq!(rows[0], ["problem.boundary.slope", "problem.boundary.intercept", "method", "value", "error"]);
    assert_eq!(rows.len(), 10);
    for row in &rows[1..] {
        let (a, b, v): (f64, f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap(), row[3].parse().unwrap());
        let exact = bcross_core::linear_one_sided_marginal(a, b, 1.0).unwrap();
        assert!((v - exact).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn sweep_over_horizon_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "problem": {"horizon": 1.0, "boundary": {"kind": "polynomial", "coefficients": [1.0, 0.0, 0.3]}},
        "methods": ["timesplit"],
        "sweep": {"parameters": [{"path": "problem.horizon", "values": [0.25, 0.5, 1.0, 2.0]}]}
    }"#;
    let rows = csv_rows(&stdout(&run(dir.path(), config, &["sweep", "--format", "csv"])));
    let values: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&run(dir.path(), LINEAR, &["sweep", "--format", "csv"]));
    assert_eq!(text, "method,value,error\n");
}

#[test]
fn diagnose_linear_gaps_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let config = LINEAR.replace(r#""slope": 0.0"#, r#""slope": 1.0"#).replace(
        r#""methods""#,
        r#""controls": {"mc": {"n_paths": 5000, "n_steps": 64}}, "diagnose": {"x_grid": [-1.0, 0.0, 0.5, 1.5]}, "methods""#,
    );
    let report: Value = serde_json::from_str(&stdout(&run(dir.path(), &config, &["diagnose"]))).unwrap();
    assert_eq!(report["girsanov_bypass"], false);
    for gap in report["gaps"].as_array().unwrap() {
        assert_eq!(gap["within_band"], true, "{gap}");
    }
    assert!(report["decomposition"]["residual_ok"].as_bool().unwrap());
}

#[test]
fn diagnose_sinusoid_reports_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "problem": {"horizon": 1.0, "boundary": {"kind": "sinusoid", "amplitude": 0.25, "angular_frequency": 6.283185307179586, "offset": 1.0}},
        "methods": ["explicit"],
        "controls": {"mc": {"n_paths": 5000, "n_steps": 64}}
    }"#;
    let report: Value = serde_json::from_str(&stdout(&run(dir.path(), config, &["diagnose"]))).unwrap();
    assert_eq!(report["gaps"].as_array().unwrap().len(), 3);
    assert!(report["decomposition"]["stats"]["max_residual"].as_f64().unwrap() <= 1e-10);
    let csv = stdout(&run(dir.path(), config, &["diagnose", "--format", "csv"]));
    assert!(csv.starts_with("x,gap,se,normalized,within_band\n"));
}

#[test]
fn diagnose_constant_boundary_bypasses_girsanov() {
    let dir = tempfile::tempdir().unwrap();
    let config = LINEAR.replace(r#""methods""#, r#""controls": {"mc": {"n_paths": 1000, "n_steps": 32}}, "methods""#);
    let report: Value = serde_json::from_str(&stdout(&run(dir.path(), &config, &["diagnose"]))).unwrap();
    assert_eq!(report["girsanov_bypass"], true);
    assert!(report.get("decomposition").is_none());
}

#[test]
fn set_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), LINEAR, &["eval", "--format", "csv", "--set", "problem.sigma=2", "--set", "methods=[\"closed_form\"]"]);
    let rows = csv_rows(&stdout(&out));
    let v: f64 = rows[1][1].parse().unwrap();
    let exact = 2.0 * (1.0 - bcross_core::normal_cdf(0.5));
    assert!((v - exact).abs() < 1e-10);
}
