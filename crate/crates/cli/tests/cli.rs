use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn choquard(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choquard")).args(args).current_dir(dir).output().expect("run choquard")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const SUBCRITICAL: &str = r#"{"problem": {"N": 3, "alpha": 0, "mu": 1, "p": 2}}"#;

#[test]
fn classify_reports_case_and_intervals() {
    let tmp = tempfile::tempdir().unwrap();
    let out = choquard(&["classify", "--N", "3", "--alpha", "0.5", "--mu", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["regularity_case"], "C1");
    assert_eq!(v["q_interval"][0].as_f64(), Some(2.0));
    assert_eq!(v["q_interval"][1].as_f64(), Some(6.0));
    assert_eq!(v["p_interval"][1], "inf");
    assert_eq!(v["critical_exponents"]["upper"].as_f64(), Some(4.0));
    assert!(v["existence_verdict"].is_null());
    assert!(v["decay_constant"].as_f64().unwrap() > 0.0);
}

#[test]
fn classify_rejects_weight_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let out = choquard(&["classify", "--N", "3", "--alpha", "2", "--mu", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("2α+μ ≤ N violated"));
}

#[test]
fn classify_flags_pohozaev_nonexistence() {
    let tmp = tempfile::tempdir().unwrap();
    let out = choquard(&["classify", "--N", "3", "--alpha", "0", "--mu", "1", "--p", "5"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["existence_verdict"], "NonexistenceByPohozaev");
}

#[test]
fn solve_then_verify_reproduces_report() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.json", SUBCRITICAL);
    let out = choquard(&["solve", "run.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert!(report["final"]["pohozaev_residual"].as_f64().unwrap().abs() < 1e-3);
    assert!(report["final"]["nehari_residual"].as_f64().unwrap().abs() < 1e-12);

    let out = choquard(&["verify", "profile.csv", "run.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let verified = json(&out);
    let close = |a: &Value, b: &Value| {
        (a.as_f64().unwrap() - b.as_f64().unwrap()).abs() <= 1e-12 * b.as_f64().unwrap().abs().max(1.0)
    };
    for key in ["kinetic", "mass", "nonlocal_D", "energy_I", "nehari_residual", "pohozaev_residual"] {
        assert!(close(&verified["final"][key], &report["final"][key]), "{key}");
    }
    assert!(close(&verified["residual"], &report["residual"]));
    assert!(close(&verified["decay"]["slope"], &report["decay"]["slope"]));
}

#[test]
fn solve_refuses_exponent_outside_range() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.json", r#"{"problem": {"N": 3, "alpha": 0, "mu": 1, "p": 5}}"#);
    let out = choquard(&["solve", "run.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Pohozaev"));
    assert!(!tmp.path().join("profile.csv").exists());
}

#[test]
fn solve_nonconvergence_still_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "run.json",
        r#"{"problem": {"N": 3, "alpha": 0, "mu": 1, "p": 2}, "solver": {"max_iter": 1},
            "outputs": {"profile": "out/u.csv", "report": "out/r.json"}}"#,
    );
    let out = choquard(&["solve", "run.json"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/r.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], false);
    assert_eq!(report["iterations"], 1);
    assert!(tmp.path().join("out/u.csv").exists());
}

#[test]
fn solve_rejects_malformed_config() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "a.json", r#"{"problem": {"N": 3, "alpha": 0, "mu": 1, "p": 2}, "extra": 1}"#);
    write_config(tmp.path(), "b.json", "{");
    assert_eq!(choquard(&["solve", "a.json"], tmp.path()).status.code(), Some(2));
    assert_eq!(choquard(&["solve", "b.json"], tmp.path()).status.code(), Some(2));
    assert_eq!(choquard(&["solve", "missing.json"], tmp.path()).status.code(), Some(2));
}

#[test]
fn extremal_forces_critical_mode() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "sub.json", SUBCRITICAL);
    let out = choquard(&["extremal", "sub.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    write_config(
        tmp.path(),
        "crit.json",
        r#"{"problem": {"N": 3, "alpha": 0, "mu": 1}, "grid": {"r_min": 1e-4, "r_max": 1e4, "n": 1024}}"#,
    );
    let out = choquard(&["extremal", "crit.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "critical");
    assert!(report["final"]["quotient"].as_f64().unwrap() > 0.0);
    assert!(report["residual_modulo_dilation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn verify_bubble_under_subcritical_params_is_informative() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.json", SUBCRITICAL);
    let grid = choquard::config::GridSpec::default().build(3).unwrap();
    let bubble = choquard::grid::RadialFunction::from_fn(grid, |r| choquard::hlslab::talenti_bubble(3, 1.0, r));
    fs::write(tmp.path().join("bubble.csv"), bubble.to_csv()).unwrap();
    let out = choquard(&["verify", "bubble.csv", "run.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["residual"].as_f64().unwrap() > 0.1);
    assert!(v["final"]["nehari_residual"].as_f64().unwrap().abs() > 0.1);
}

#[test]
fn verify_rejects_truncated_csv() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.json", SUBCRITICAL);
    fs::write(tmp.path().join("short.csv"), "r,u\n0.0001,1.0\n0.0002,0.9\n").unwrap();
    let out = choquard(&["verify", "short.csv", "run.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(tmp.path().join("garbled.csv"), "r,u\n0.0001,abc\n").unwrap();
    assert_eq!(choquard(&["verify", "garbled.csv", "run.json"], tmp.path()).status.code(), Some(2));
}

#[test]
fn hls_check_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["hls-check", "--preset", "gaussian", "--samples", "100000", "--seed", "42"];
    let a = choquard(&args, tmp.path());
    let b = choquard(&args, tmp.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["pass"], true);
    assert_eq!(v["estimate"]["seed"], 42);
}

#[test]
fn hls_check_splitting_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = choquard(
        &["hls-check", "--preset", "brezis-lieb", "--samples", "200000", "--seed", "1", "--shift", "20"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["split"]["defect"].as_f64().unwrap() < 0.05);
    let out = choquard(
        &["hls-check", "--preset", "brezis-lieb", "--samples", "2000", "--seed", "1", "--shift", "1.5"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hls_check_argument_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let few = choquard(&["hls-check", "--preset", "gaussian", "--samples", "10", "--seed", "1"], tmp.path());
    assert_eq!(few.status.code(), Some(2));
    let unseeded = choquard(&["hls-check", "--preset", "gaussian", "--samples", "10000"], tmp.path());
    assert_eq!(unseeded.status.code(), Some(2));
}

#[test]
fn kernel_table_lists_every_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let out = choquard(&["kernel-table", "--N", "3", "--mu", "1", "--n", "16"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,j,r_i,s_j,k"));
    assert_eq!(lines.count(), 16 * 16);
}

#[test]
fn thread_cap_must_be_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_choquard"))
        .args(["classify", "--N", "3", "--alpha", "0", "--mu", "1"])
        .env("CHOQUARD_THREADS", "0")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
