use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use rcl_ffi::*;

fn parse(spec: &str) -> *mut RclUtility {
    let s = CString::new(spec).unwrap();
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { rcl_utility_parse(s.as_ptr(), &mut u) }, RclStatus::Ok);
    u
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rcl_last_error_message()) }.to_string_lossy().into_owned()
}

fn rewards(r: *const RclRewards) -> Vec<f64> {
    let n = unsafe { rcl_rewards_len(r) };
    let mut buf = vec![0.0; n];
    assert_eq!(unsafe { rcl_rewards_copy(r, buf.as_mut_ptr(), n) }, RclStatus::Ok);
    buf
}

#[test]
fn solve_three_points() {
    let u = parse("power:gamma=0.5");
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rcl_solve(u, 3, ptr::null(), &mut r) }, RclStatus::Ok);
    let v = rewards(r);
    assert_eq!(v.len(), 3);
    assert_eq!((v[0], v[2]), (1.0, 0.0));
    assert!((v[1] - 0.5).abs() < 1e-9);
    let mut info = RclSolveInfo::default();
    assert_eq!(unsafe { rcl_rewards_info(r, &mut info) }, RclStatus::Ok);
    assert!(info.converged && info.unique);
    assert!((info.objective - (1.0 + 2.0 * 0.5f64.sqrt())).abs() < 1e-9);
    unsafe {
        rcl_rewards_free(r);
        rcl_utility_free(u);
    }
}

#[test]
fn bad_spec_sets_the_message() {
    let s = CString::new("power:gamma=7").unwrap();
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { rcl_utility_parse(s.as_ptr(), &mut u) }, RclStatus::InvalidUtility);
    assert!(u.is_null());
    assert!(last_error().contains("gamma"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { rcl_utility_parse(ptr::null(), &mut u) }, RclStatus::NullPointer);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rcl_solve(ptr::null(), 3, ptr::null(), &mut r) }, RclStatus::NullPointer);
    assert_eq!(unsafe { rcl_rewards_len(ptr::null()) }, 0);
    unsafe {
        rcl_rewards_free(ptr::null_mut());
        rcl_utility_free(ptr::null_mut());
    }
}

#[test]
fn small_buffer_is_reported() {
    let u = parse("log");
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rcl_solve(u, 10, ptr::null(), &mut r) }, RclStatus::Ok);
    let mut buf = [0.0; 4];
    assert_eq!(unsafe { rcl_rewards_copy(r, buf.as_mut_ptr(), 4) }, RclStatus::BufferTooSmall);
    unsafe {
        rcl_rewards_free(r);
        rcl_utility_free(u);
    }
}

#[test]
fn non_convergence_returns_the_partial_result() {
    let u = parse("power:gamma=0.5");
    let cfg = RclSolverConfig {
        max_iters: 1,
        ..rcl_solver_config_default()
    };
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rcl_solve(u, 40, &cfg, &mut r) }, RclStatus::NotConverged);
    assert_eq!(unsafe { rcl_rewards_len(r) }, 40);
    let mut info = RclSolveInfo::default();
    unsafe { rcl_rewards_info(r, &mut info) };
    assert!(!info.converged);
    unsafe {
        rcl_rewards_free(r);
        rcl_utility_free(u);
    }
}

#[test]
fn limit_and_ks() {
    let u = parse("power:gamma=0.5");
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { rcl_limit_beta(u, &mut a, &mut b) }, RclStatus::Ok);
    assert_eq!((a, b), (0.25, 0.25));
    let mut r = ptr::null_mut();
    unsafe { rcl_solve(u, 50, ptr::null(), &mut r) };
    let v = rewards(r);
    let mut ks = f64::NAN;
    assert_eq!(unsafe { rcl_ks_distance(v.as_ptr(), v.len(), u, &mut ks) }, RclStatus::Ok);
    assert!(ks > 0.0 && ks <= 0.03, "{ks}");

    let lin = parse("linear");
    assert_eq!(unsafe { rcl_limit_beta(lin, &mut a, &mut b) }, RclStatus::Inapplicable);
    assert!(last_error().contains("0.5"));
    unsafe {
        rcl_rewards_free(r);
        rcl_utility_free(u);
        rcl_utility_free(lin);
    }
}

#[test]
fn btl_through_the_abi() {
    let u = parse("logsigmoid:sigma=1");
    let thetas = [0.5, -1.0, 2.0, 0.0];
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rcl_solve_btl(u, thetas.as_ptr(), 4, ptr::null(), &mut r) }, RclStatus::Ok);
    let v = rewards(r);
    assert!(v[2] >= v[0] && v[0] >= v[3] && v[3] >= v[1]);
    unsafe {
        rcl_rewards_free(r);
        rcl_utility_free(u);
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("rcl.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct RclUtility RclUtility;",
        "typedef struct RclRewards RclRewards;",
        "RCL_STATUS_NOT_CONVERGED = 4",
        "rcl_solve(",
        "rcl_solve_btl(",
        "rcl_last_error_message(",
    ] {
        assert!(h.contains(name), "missing `{name}` in rcl.h");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    // target/<profile>/deps/abi-xxxx -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    // test builds only produce the rlib, so build the static library explicitly
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut build = Command::new(cargo);
    build.args(["build", "-q", "-p", "rcl-ffi", "--lib"]);
    if profile_dir.file_name().is_some_and(|n| n == "release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success(), "cargo build failed");
    let lib = profile_dir.join("librcl_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "rcl.h"

int main(void) {
    RclUtility *u = NULL;
    if (rcl_utility_parse("power:gamma=0.5", &u) != RCL_STATUS_OK) return 1;
    RclRewards *r = NULL;
    if (rcl_solve(u, 3, NULL, &r) != RCL_STATUS_OK) return 2;
    double buf[3];
    if (rcl_rewards_copy(r, buf, 3) != RCL_STATUS_OK) return 3;
    printf("%.6f %.6f %.6f\n", buf[0], buf[1], buf[2]);
    RclUtility *bad = NULL;
    if (rcl_utility_parse("nope", &bad) != RCL_STATUS_INVALID_UTILITY) return 4;
    printf("%s\n", rcl_last_error_message());
    rcl_rewards_free(r);
    rcl_utility_free(u);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("1.000000 0.500000 0.000000"));
    assert!(lines.next().unwrap().contains("unknown family"));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
