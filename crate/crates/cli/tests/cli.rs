use std::process::{Command, Output};

use serde_json::Value;

fn eigenloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenloc")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

const DESK: [&str; 14] = [
    "--xi", "0.2", "--zeta", "0.5", "--beta", "0.55", "--tau", "0.86", "--gamma", "1.5", "--kappa", "0.03",
    "--varsigma", "0.5",
];

#[test]
fn exponents_validate_exit_codes() {
    let mut args = vec!["exponents", "validate"];
    args.extend(DESK);
    let ok = eigenloc(&args);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["valid"], Value::Bool(true));

    let mut bad = args.clone();
    let g = bad.iter().position(|a| *a == "1.5").unwrap();
    bad[g] = "3.0";
    let out = eigenloc(&bad);
    assert_eq!(out.status.code(), Some(1));
    assert!(!json(&out)["violations"].as_array().unwrap().is_empty());
}

#[test]
fn exponents_solve_bottom_mode() {
    let out = eigenloc(&["exponents", "solve", "--xi", "0.1", "--zeta", "0.3", "--dim", "2", "--bottom"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["valid"], Value::Bool(true));
    assert!((v["exponents"]["kappa_prime"].as_f64().unwrap() - 0.3).abs() < 1e-12);

    let out = eigenloc(&["exponents", "solve", "--xi", "0.1", "--zeta", "0.4", "--bottom"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cover_check_reports_structure() {
    let out = eigenloc(&["cover", "check", "--side", "10", "--child", "4"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["centers"], 5);
    assert_eq!(v["k_ell"], 3);
    assert!((v["rho"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn start_run_writes_files_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = eigenloc(&[
        "msa",
        "start",
        "--trials",
        "12",
        "--workers",
        "3",
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("experiment,label,successes,trials"));
    let records = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 12);
    assert!(records.lines().all(|l| l.contains("\"seed\":9")));
    assert_eq!(std::fs::read_to_string(out_dir.join("summary.csv")).unwrap().lines().count(), 2);
}

#[test]
fn config_errors_exit_nonzero_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "experiment = \"start\"\ndim = 1\nmaster_seed = 1\n").unwrap();
    let out = eigenloc(&["msa", "start", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));

    std::fs::write(&path, "experiment = \"spacing\"\n").unwrap();
    let out = eigenloc(&["msa", "start", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn box_verdict_is_deterministic() {
    let a = eigenloc(&["box", "verdict", "--trial", "3"]);
    let b = eigenloc(&["box", "verdict", "--trial", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["per_eigenvalue"].as_array().unwrap().len(), 21);
    let expected = if v["overall"].as_bool().unwrap() { 0 } else { 1 };
    assert_eq!(a.status.code(), Some(expected));
}
