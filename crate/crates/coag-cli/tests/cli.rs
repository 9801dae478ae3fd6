use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn coag(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coag"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("coag runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_error_line(o: &Output, code: i32, tag: &str) {
    assert_eq!(o.status.code(), Some(code), "{}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error code={tag} reason=")), "{err}");
}

#[test]
fn exact_matches_golden_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = coag(&["exact", "--rho", "0.5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let got = json(&dir.path().join("exact_summary.json"));
    let want: Value =
        serde_json::from_str(include_str!("fixtures/exact_rho05_summary.json")).unwrap();
    let close = |a: &Value, b: &Value| {
        let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        (a - b).abs() <= 1e-10 * b.abs().max(1.0)
    };
    for key in ["rho", "m0", "small_x_coefficient", "tail_coefficient"] {
        assert!(close(&got[key], &want[key]), "{key}: {} vs {}", got[key], want[key]);
    }
    let (gm, wm) = (got["moments"].as_array().unwrap(), want["moments"].as_array().unwrap());
    assert_eq!(gm.len(), wm.len());
    for (g, w) in gm.iter().zip(wm) {
        assert!(close(&g["gamma"], &w["gamma"]));
        assert!(close(&g["closed_form"], &w["closed_form"]), "{g} vs {w}");
        let rel = g["quadrature"].as_f64().unwrap() / w["closed_form"].as_f64().unwrap() - 1.0;
        assert!(rel.abs() < 1e-6, "{g}");
    }
    assert!(got["qode_identity_residual"].as_f64().unwrap() < 1e-12);
    for f in ["exact_laplace.csv", "exact_density.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn out_of_range_rho_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_error_line(&coag(&["exact", "--rho", "1.2"], dir.path()), 2, "config");
}

#[test]
fn zero_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_error_line(&coag(&["verify-kernel", "--alpha", "0"], dir.path()), 2, "config");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_error_line(&coag(&["solve", "--bogus"], dir.path()), 2, "usage");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"solver": {"epsilonn": 0.01}}"#).unwrap();
    let o = coag(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_error_line(&o, 2, "config");
}

#[test]
fn large_epsilon_reports_non_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"solver": {"epsilon": 0.5, "epsilon_cap": 1.0}}"#).unwrap();
    let out = dir.path().join("o");
    let o = coag(&["solve", "--config", cfg.to_str().unwrap()], &out);
    assert_error_line(&o, 3, "non_contraction");
    assert!(!out.join("profile.csv").exists());
}

#[test]
fn verify_kernel_writes_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = coag(&["verify-kernel", "--alpha", "0.45", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("kernel_report.json"));
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["max_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn solve_then_diagnose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = coag(&["solve", "--epsilon", "0.01"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["converged"], Value::Bool(true));
    let profile = dir.path().join("profile.csv");
    let diag = dir.path().join("d");
    let o = coag(&["diagnose", profile.to_str().unwrap(), "--epsilon", "0.01"], &diag);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = json(&diag.join("diagnostics.json"));
    let (k1, k2) = (report["kappa"].as_f64().unwrap(), d["kappa"].as_f64().unwrap());
    assert!((k1 - k2).abs() < 1e-9 * k1.abs(), "{k1} vs {k2}");
    let tail = d["tail_normalization"].as_f64().unwrap();
    assert!((tail / 0.49 - 1.0).abs() < 0.02, "{tail}");
}

#[test]
fn diagnose_rejects_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = coag(&["diagnose", "/nonexistent/profile.csv"], dir.path());
    assert_error_line(&o, 1, "io");
}
