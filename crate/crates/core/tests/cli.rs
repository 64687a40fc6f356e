use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use retrial_tails::cli::{run, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
use serde_json::Value;

const EXP_BOUNDARY: &str = r#"{"service":{"kind":"exponential","mu":1.0},"params":{"lambda1":0.25,"lambda2":0.25,"nu":1.0}}"#;
const PARETO: &str = r#"{"service":{"kind":"pareto","p":1.5,"x0":1.0},"params":{"lambda1":0.1,"lambda2":0.1,"nu":1.0}}"#;
// n_max = 150 gives M = 1024 contour points, so aliasing (0.95)^M sits far below 1e-12
const NOQUEUE: &str = r#"{"service":{"kind":"exponential","mu":1.0},"params":{"lambda1":0.0,"lambda2":0.5,"nu":1.0},
  "options":{"n_max":150,"digits":50,"seed":11,"warmup_events":10000,"measure_events":200000,"batches":20}}"#;
const UNSTABLE: &str = r#"{"service":{"kind":"exponential","mu":1.0},"params":{"lambda1":0.5,"lambda2":0.6,"nu":1.0}}"#;

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut full = vec!["retrial-tails"];
    full.extend_from_slice(args);
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = run(full, &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

fn schema_check(json: &str) {
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let inst: Value = serde_json::from_str(json).unwrap();
    let errors: Vec<String> = validator.iter_errors(&inst).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}\n{json}");
}

#[test]
fn analyze_boundary_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "b.json", EXP_BOUNDARY);
    let (code, out, _) = call(&["analyze", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    schema_check(&out);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["regime"], "Case3_Boundary");
    assert!((v["decay_rate"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    assert_eq!(v["laws"]["p2"]["power_exponent"].as_f64(), Some(-0.5));
}

#[test]
fn analyze_pareto_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "p.json", PARETO);
    let (code, out, _) = call(&["analyze", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    schema_check(&out);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["regime"], "Type3Dominant");
    assert_eq!(v["laws"]["p2"]["power_exponent"].as_f64(), Some(-1.5));
}

#[test]
fn analyze_is_referentially_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "b.json", EXP_BOUNDARY);
    let a = call(&["analyze", cfg.to_str().unwrap()]).1;
    let b = call(&["analyze", cfg.to_str().unwrap()]).1;
    assert_eq!(a, b);
}

#[test]
fn unstable_config_exits_2_naming_stability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "u.json", UNSTABLE);
    let (code, _, err) = call(&["analyze", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("stability invariant"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_retrial-tails");
    let bad = write_cfg(dir.path(), "u.json", UNSTABLE);
    let st = Command::new(bin).args(["analyze", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_VALIDATION));
    let typo = write_cfg(dir.path(), "t.json", r#"{"service":{"kind":"exponential","mu":1.0},"param":{}}"#);
    let st = Command::new(bin).args(["analyze", typo.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_VALIDATION));
    let ok = write_cfg(dir.path(), "b.json", EXP_BOUNDARY);
    let st = Command::new(bin).args(["analyze", ok.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_OK));
}

#[test]
fn coeffs_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "n.json", NOQUEUE);
    let out = dir.path().join("out");
    let (code, _, err) = call(&["coeffs", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--target", "P2"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let csv = fs::read_to_string(out.join("coeffs_P2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 151);
    assert!(csv.starts_with("n,coeff,usable,est_abs_error\n"));
    assert!(!csv.contains('\r'));
    let summary = fs::read_to_string(out.join("coeffs_P2.json")).unwrap();
    schema_check(&summary);
    let ratio = fs::read_to_string(out.join("ratio_P2.csv")).unwrap();
    assert_eq!(ratio.lines().count(), 1 + 150);
}

#[test]
fn dual_oracle_csvs_identical_at_12_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "n.json", NOQUEUE);
    for target in ["Q", "R", "P2"] {
        let args = ["coeffs", cfg.to_str().unwrap(), "--target", target, "--round-digits", "12"];
        let (c1, contour, _) = call(&args);
        let mut closed_args = args.to_vec();
        closed_args.push("--closed-form");
        let (c2, closed, _) = call(&closed_args);
        assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
        assert_eq!(contour, closed, "target {target}");
        assert_eq!(contour.lines().count(), 152);
    }
}

#[test]
fn coeffs_precision_exhausted_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "n.json", NOQUEUE);
    let (code, _, err) = call(&["coeffs", cfg.to_str().unwrap(), "--n-max", "2000", "--digits", "30", "--target", "Q"]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert!(err.contains("precision exhausted: coefficient"), "{err}");
}

#[test]
fn simulate_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "n.json", NOQUEUE);
    let a = call(&["simulate", cfg.to_str().unwrap()]);
    let b = call(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(a.0, EXIT_OK, "{}", a.2);
    assert_eq!(a.1, b.1);
    assert!(a.1.starts_with("n,q_emp,q_hw,r_emp,r_hw,p2_emp,p2_hw\n"));
    let c = call(&["simulate", cfg.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(a.1, c.1);
    // the summary goes to stderr when no output directory is given
    schema_check(&a.2);
    let v: Value = serde_json::from_str(&a.2).unwrap();
    let (u, hw) = (v["utilization"].as_f64().unwrap(), v["utilization_hw"].as_f64().unwrap());
    assert!((u - 0.5).abs() < 3.0 * hw, "{u} ± {hw}");
}

#[test]
fn regime_map_order_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let one = call(&["regime-map", "--grid", "12", "--workers", "1"]);
    let many = call(&["regime-map", "--grid", "12", "--workers", "8"]);
    assert_eq!(one.0, EXIT_OK);
    assert_eq!(one.1, many.1);
    assert!(!one.1.contains("disagree"));
    schema_check(&one.2);

    let cfg = write_cfg(dir.path(), "g.json", r#"{"grid":{"lambda1":[0.0,1.0],"lambda2":[0.0,1.0],"steps":3}}"#);
    let (code, csv, _) = call(&["regime-map", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    // interior points 0.25, 0.5, 0.75 per axis; 3 of 9 lie strictly inside λ1 + λ2 < 1
    assert_eq!(csv.lines().count(), 1 + 3);
    let row = csv.lines().find(|l| l.starts_with("0,0,")).unwrap();
    assert!(row.ends_with("Case3_Boundary,Case3_Boundary,band"), "{row}");

    let pareto = write_cfg(dir.path(), "p.json", PARETO);
    assert_eq!(call(&["regime-map", pareto.to_str().unwrap()]).0, EXIT_VALIDATION);
}

#[test]
fn validate_single_scenario() {
    let (code, out, err) = call(&["validate", "noqueue"]);
    assert_eq!(code, EXIT_OK, "{err}");
    schema_check(&out);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(call(&["validate", "no-such-scenario"]).0, EXIT_VALIDATION);
}
