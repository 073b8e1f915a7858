use std::process::{Command, Output};

use serde_json::Value;

const ARMA11: &str = r#"{"kind":"arma","A":{"rows":1,"cols":1,"coeffs":[[[1.0]],[[0.5]]]},"B":{"rows":1,"cols":1,"coeffs":[[[1.0]],[[0.3]]]}}"#;
const STRICTLY_PROPER: &str = r#"{"kind":"ss","A":[[0.5]],"B":[[1.0]],"C":[[1.0]],"D":[[0.0]]}"#;
const UNSTABLE: &str = r#"{"kind":"arma","A":{"rows":1,"cols":1,"coeffs":[[[1.0]],[[-1.5]]]},"B":{"rows":1,"cols":1,"coeffs":[[[1.0]]]}}"#;
const UNIMODULAR: &str = r#"{"kind":"arma","A":{"rows":2,"cols":2,"coeffs":[[[1,0],[0,1]]]},"B":{"rows":2,"cols":2,"coeffs":[[[1,0],[0,1]],[[0,1],[0,0]]]}}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsgeom")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn entry(v: &Value, i: usize, j: usize) -> f64 {
    v["entries"][i][j].as_f64().unwrap()
}

#[test]
fn analyze_scalar_arma() {
    let v = json(&run(&["analyze", "--input", ARMA11]));
    assert_eq!(v["hankel"]["indices"], serde_json::json!([1]));
    assert_eq!(v["mcmillan_degree"], 1);
    assert_eq!(v["stability"]["stable"], true);
    assert_eq!(v["irreducibility"]["irreducible"], true);
}

#[test]
fn analyze_unimodular() {
    let v = json(&run(&["analyze", "--input", UNIMODULAR]));
    assert_eq!(v["hankel"]["indices"], serde_json::json!([1, 0]));
    assert_eq!(v["mcmillan_degree"], 1);
}

#[test]
fn unstable_system() {
    let v = json(&run(&["analyze", "--input", UNSTABLE]));
    assert_eq!(v["stability"]["stable"], false);
    assert_eq!(run(&["tensor", "--input", UNSTABLE]).status.code(), Some(3));
}

#[test]
fn deterministic_tensor() {
    let v = json(&run(&["tensor", "--det", "--param", "arma-full", "--input", ARMA11]));
    assert!((entry(&v, 0, 0) - 1.807_407_407_407_407).abs() < 1e-10);
    assert!((entry(&v, 0, 1) + 1.511_111_111_111_111).abs() < 1e-10);
    assert!((entry(&v, 1, 1) - 4.0 / 3.0).abs() < 1e-10);
    assert_eq!(v["meta"]["parametrization"], "arma-full");
    let n = json(&run(&["tensor", "--det", "--mode", "numeric", "--input", ARMA11]));
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        assert!((entry(&v, i, j) - entry(&n, i, j)).abs() < 1e-6);
    }
}

#[test]
fn stochastic_tensor_strictly_proper() {
    let v = json(&run(&["tensor", "--stoch", "--mode", "two_sided_T", "--input", STRICTLY_PROPER]));
    assert!((entry(&v, 0, 0) - 24.230_452_674_897_1).abs() < 1e-8);
    assert!((entry(&v, 0, 1) - 128.0 / 9.0).abs() < 1e-8);
    assert!((entry(&v, 1, 1) - 320.0 / 27.0).abs() < 1e-8);
    let u = json(&run(&["tensor", "--stoch", "--mode", "one_sided_U", "--input", STRICTLY_PROPER]));
    assert!((entry(&u, 0, 0) - 13.695_473_251_028_8).abs() < 1e-8);
    assert_eq!(u["meta"]["kind"], "one_sided_U");
}

#[test]
fn chart_parametrizations() {
    let s = json(&run(&["tensor", "--param", "ss-chart", "--input", ARMA11]));
    let a = json(&run(&["tensor", "--param", "arma-chart", "--input", ARMA11]));
    assert_eq!(s["labels"].as_array().unwrap().len(), 2);
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        assert!((entry(&s, i, j) - entry(&a, i, j)).abs() < 1e-9);
    }
}

#[test]
fn verify_suite() {
    let out = run(&["verify-paper"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(!text.contains("FAIL "));
    assert!(text.contains("TYPO"));
    let out = run(&["verify-paper", "--row", "G2"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    let out = run(&["verify-paper", "--grid", "5", "--row", "ARMA11"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 60);
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(run(&["analyze", "--input", "{\"kind\":"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--input", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(run(&["tensor", "--nodes", "100", "--input", ARMA11]).status.code(), Some(2));
    assert_eq!(run(&["verify-paper", "--row", "NOPE"]).status.code(), Some(2));
    assert_eq!(run(&["demo-noninvariance", "--q", "0"]).status.code(), Some(2));
    assert_eq!(run(&["tensor", "--det", "--stoch", "--input", ARMA11]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let a = run(&["demo-noninvariance", "--seed", "3"]);
    let b = run(&["demo-noninvariance", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    for (k, r) in v["reports"].as_array().unwrap().iter().enumerate() {
        assert_eq!(r["q"], k + 1);
        assert!(r["markov_residual"].as_f64().unwrap() < 1e-10);
    }
    let t1 = run(&["tensor", "--stoch", "--input", STRICTLY_PROPER]);
    let t2 = run(&["tensor", "--stoch", "--input", STRICTLY_PROPER]);
    assert_eq!(t1.stdout, t2.stdout);
}

#[test]
fn output_file_and_inner_product() {
    let dir = std::env::temp_dir().join(format!("lsgeom-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ip.json");
    let pair = format!(r#"{{"left":{STRICTLY_PROPER},"right":{ARMA11}}}"#);
    let out = run(&["inner-product", "--input", &pair, "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["difference"].as_f64().unwrap() < 1e-12);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn help_lists_schema() {
    let out = run(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["\"kind\":\"arma\"", "\"kind\":\"ss\"", "\"kind\":\"markov\"", "EXIT CODES"] {
        assert!(text.contains(needle), "{needle}");
    }
}
