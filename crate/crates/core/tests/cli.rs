use std::path::Path;
use std::process::{Command, Output};

use rcl::asymptotics::{ks_distance, limit_distribution};
use rcl::solver::{solve_finite_n, SolverConfig};
use rcl::utility::UtilitySpec;
use serde_json::Value;

fn rcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcl"))
        .args(args)
        .env_remove("RCL_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_line(out: &Output) -> Value {
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    serde_json::from_str(err.trim_end()).expect("stderr is one JSON line")
}

#[test]
fn solve_two_points() {
    let v = json(&rcl(&["solve", "--utility", "power:gamma=0.5", "--n", "2"]));
    assert_eq!(v["rewards"], serde_json::json!([1.0, 0.0]));
    assert_eq!(v["unique"], Value::Bool(true));
}

#[test]
fn limit_of_power() {
    let v = json(&rcl(&["limit", "--utility", "power:gamma=0.8"]));
    assert_eq!(v["kind"], "beta");
    assert!((v["alpha"].as_f64().unwrap() - 0.1).abs() < 1e-15);
    assert!((v["beta"].as_f64().unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn csv_round_trip_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rewards.csv");
    let csv_s = csv.to_str().unwrap();
    let out = rcl(&["solve", "--utility", "power:gamma=0.5", "--n", "60", "--output", "csv", "--out", csv_s]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("rank,reward\n"));

    let fit = json(&rcl(&["fit", "--rewards", csv_s, "--utility", "power:gamma=0.5"]));
    let u = UtilitySpec::power(0.5).unwrap();
    let r = solve_finite_n(&u, 60, &SolverConfig::default()).unwrap();
    let ks = ks_distance(&r.rewards, &limit_distribution(&u).unwrap()).unwrap();
    assert!((fit["ks"].as_f64().unwrap() - ks).abs() <= 1e-12);
}

#[test]
fn identical_runs_are_byte_identical() {
    for args in [
        &["collapse-demo", "--prompts", "6", "--n", "6", "--seed", "3"][..],
        &["solve", "--utility", "log", "--n", "40"][..],
        &["measure", "--utility", "power:gamma=0.5", "--grid", "31", "--output", "csv"][..],
    ] {
        let a = rcl(args);
        let b = rcl(args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn both_outputs_go_to_sibling_files() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("demo");
    let out = rcl(&["collapse-demo", "--output", "both", "--out", stem.to_str().unwrap()]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["collapse_gap_fixed"].as_f64(), Some(0.0));
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("prompt_id,kind,rank,reward,mode"));
    // 16 prompts, 8 ranks, two modes
    assert_eq!(lines.count(), 16 * 8 * 2);
}

#[test]
fn btl_reports_order_and_bound() {
    let v = json(&rcl(&["btl", "--utility", "power:gamma=0.5", "--thetas", "preset:right"]));
    assert_eq!(v["order_ok"], Value::Bool(true));
    assert_eq!(v["bound_report"]["applicable"], Value::Bool(true));
    assert_eq!(v["bound_report"]["violations"].as_array().unwrap().len(), 0);

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("thetas.txt");
    std::fs::write(&f, "theta\n0.3\n-1\n2\n").unwrap();
    let v = json(&rcl(&["btl", "--utility", "logsigmoid:sigma=1", "--thetas", f.to_str().unwrap()]));
    let r: Vec<f64> = v["rewards"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(r[2] >= r[0] && r[0] >= r[1]);
}

#[test]
fn exit_codes_and_error_lines() {
    let bad = rcl(&["solve", "--utility", "power:gamma=2", "--n", "5"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(error_line(&bad)["code"], "invalid_utility");

    let unknown = rcl(&["solve", "--utility", "linear", "--n", "5", "--frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(error_line(&unknown)["code"], "usage");

    let slow = rcl(&["solve", "--utility", "power:gamma=0.5", "--n", "50", "--max-iters", "1"]);
    assert_eq!(slow.status.code(), Some(1));
    assert_eq!(error_line(&slow)["code"], "not_converged");

    let missing = rcl(&["fit", "--rewards", "/nonexistent/r.csv", "--utility", "log"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_line(&missing)["code"], "io");

    let no_csv = rcl(&["limit", "--utility", "log", "--output", "csv"]);
    assert_eq!(no_csv.status.code(), Some(2));
}

#[test]
fn failed_runs_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("never.json");
    let out = rcl(&["solve", "--utility", "power:gamma=0.5", "--n", "50", "--max-iters", "1", "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new(&p).exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_rcl"))
        .args(["limit", "--utility", "log"])
        .env("RCL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_rcl"))
        .args(["collapse-demo", "--prompts", "4", "--n", "5"])
        .env("RCL_THREADS", "2")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn verify_passes() {
    let v = json(&rcl(&["verify"]));
    assert_eq!(v["passed"], Value::Bool(true));
}
