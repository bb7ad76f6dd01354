//! End-to-end tests of the command-line interface: exit codes, output
//! schemas, and cross-method consistency.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delayed-claims"))
}

fn write_config(dir: &Path, sigma_kind: &str, maturity: f64, level: f64) -> PathBuf {
    let values: Vec<String> = (0..65).map(|_| format!("{level}")).collect();
    let vol = match sigma_kind {
        "constant" => r#"{"kind": "constant", "sigma": 0.2}"#.to_string(),
        "tiny" => r#"{"kind": "constant", "sigma": 1e-12}"#.to_string(),
        other => panic!("unknown vol kind {other}"),
    };
    let json = format!(
        r#"{{
  "model": {{"alpha": 0.0, "payout_c": 0.0, "l1": 1.0, "l2": 1.0, "vol": {vol}}},
  "market": {{"r": 0.05}},
  "contract": {{"face": 80.0, "maturity": {maturity}}},
  "history": {{"inline": {{"t0": -1.0, "dt": 0.015625, "values": [{}]}}}}
}}"#,
        values.join(",")
    );
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout parses as JSON")
}

#[test]
fn price_closed_and_pde_agree_within_printed_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 100.0);
    let closed = stdout_json(&run(&[
        "price",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "equity",
        "--method",
        "closed",
    ]));
    let pde = stdout_json(&run(&[
        "price",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "equity",
        "--method",
        "pde",
        "--grid",
        "200x200",
    ]));
    assert_eq!(closed["method"], "closed-form");
    assert_eq!(pde["method"], "pde");
    let gap = (closed["value"].as_f64().unwrap() - pde["value"].as_f64().unwrap()).abs();
    let tolerance = pde["tolerance"].as_f64().unwrap();
    assert!(
        gap <= tolerance,
        "closed/pde gap {gap} exceeds printed tolerance {tolerance}"
    );
}

#[test]
fn price_mc_reports_positive_stderr_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 100.0);
    let out_file = dir.path().join("mc.json");
    let out = run(&[
        "price",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "debt",
        "--method",
        "mc",
        "--paths",
        "2000",
        "--seed",
        "11",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let json: Value = serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(json["kind"], "debt");
    assert!(json["stderr"].as_f64().unwrap() > 0.0);
    assert_eq!(json["n_paths"].as_u64().unwrap(), 2000);
    assert_eq!(json["seed"].as_u64().unwrap(), 11);
    assert!(json["h"].as_f64().unwrap() > 0.0);
}

#[test]
fn price_mc_requires_explicit_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 100.0);
    let out = run(&[
        "price",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "debt",
        "--method",
        "mc",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn guarantee_worthless_for_huge_firm_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 50_000.0);
    let json = stdout_json(&run(&[
        "price",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "guarantee",
        "--method",
        "closed",
    ]));
    assert!(json["value"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn window_violation_exits_4_naming_horizon_and_delay() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 3.0, 100.0);
    for method in ["closed", "pde", "heat"] {
        let out = run(&[
            "price",
            "--config",
            config.to_str().unwrap(),
            "--kind",
            "equity",
            "--method",
            method,
        ]);
        assert_eq!(out.status.code(), Some(4), "method {method}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains("T-t = 3"), "message: {stderr}");
        assert!(stderr.contains("l2 = 1"), "message: {stderr}");
    }
}

#[test]
fn simulate_deterministic_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "tiny", 1.0, 100.0);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let res = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--step",
            "0.05",
            "--horizon",
            "1.0",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same seed must produce identical files");

    // tiny volatility and zero drift: constant column
    let parsed = delayed_claims::HistoryPath::read_csv(&a[..]).unwrap();
    for v in parsed.values() {
        assert!((v - 100.0).abs() < 1e-6);
    }
}

#[test]
fn simulate_missing_history_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
  "model": {"alpha": 0.0, "payout_c": 0.0, "l1": 1.0, "l2": 1.0,
            "vol": {"kind": "constant", "sigma": 0.2}},
  "market": {"r": 0.05},
  "contract": {"face": 80.0, "maturity": 1.0},
  "history": {"csv": "/nonexistent/history.csv"}
}"#;
    let config = dir.path().join("config.json");
    fs::write(&config, json).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--step",
        "0.05",
        "--horizon",
        "1.0",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn curve_csv_schema_and_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 100.0);
    let out_file = dir.path().join("curve.csv");
    let out = run(&[
        "curve",
        "--config",
        config.to_str().unwrap(),
        "--d-grid",
        "0.25,0.5,1.0,1.5",
        "--tau-grid",
        "0.5,1.0,2.0",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&out_file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau1,d,premium"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    // tau = 2.0 > l2: premiums invalid (empty field), not dropped
    for row in &rows[8..] {
        assert!(row.ends_with(','), "expected invalid cell, got {row}");
    }
    // premiums nondecreasing in d within each valid tau block
    for block in rows[..8].chunks(4) {
        let mut prev = -1.0;
        for row in block {
            let p: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
            assert!(p >= prev - 1e-15);
            prev = p;
        }
    }
}

#[test]
fn default_prob_json_and_impact_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 100.0);
    let json = stdout_json(&run(&[
        "default-prob",
        "--config",
        config.to_str().unwrap(),
    ]));
    let p = json["p_default"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);

    let out = run(&[
        "default-prob",
        "--config",
        config.to_str().unwrap(),
        "--b-prime",
        "20",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("v,B,Bprime,p_before,p_after"));
    let fields: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    // v = 100 > B = 80: additional debt widens the default probability
    assert!(fields[4] > fields[3]);
    assert!((fields[3] - p).abs() < 1e-12);
}

#[test]
fn converge_emits_ladder_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant", 1.0, 100.0);
    let out_file = dir.path().join("ladder.csv");
    let out = run(&[
        "converge",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "equity",
        "--ladder",
        "32x32,64x64,128x128",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&out_file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n_space,n_time,max_rel_error"));
    let errs: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 3);
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors {errs:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("empirical spatial order"));
}

#[test]
fn euler_blowup_exits_3() {
    // Violent negative drift drives the explicit Euler step nonpositive.
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
  "model": {"alpha": -50.0, "payout_c": 0.0, "l1": 1.0, "l2": 1.0,
            "vol": {"kind": "constant", "sigma": 1e-6}},
  "market": {"r": 0.05},
  "contract": {"face": 80.0, "maturity": 1.0},
  "history": {"inline": {"t0": -1.0, "dt": 0.5, "values": [10, 10, 10]}}
}"#;
    let config = dir.path().join("config.json");
    fs::write(&config, json).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--scheme",
        "euler",
        "--step",
        "0.5",
        "--horizon",
        "5.0",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("step"), "diagnostic: {stderr}");
}

#[test]
fn invalid_config_field_named_in_error() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
  "model": {"alpha": 0.0, "payout_c": 0.0, "l1": -1.0, "l2": 1.0,
            "vol": {"kind": "constant", "sigma": 0.2}},
  "market": {"r": 0.05},
  "contract": {"face": 80.0, "maturity": 1.0},
  "history": {"inline": {"t0": -1.0, "dt": 0.5, "values": [100, 100, 100]}}
}"#;
    let config = dir.path().join("config.json");
    fs::write(&config, json).unwrap();
    let out = run(&[
        "price",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "equity",
        "--method",
        "closed",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("l1"), "error should name the field: {stderr}");
}
