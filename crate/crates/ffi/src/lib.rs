//! C interface to the rcl solvers.
//!
//! Every function returns an [`RclStatus`]. On failure a message is kept per
//! thread and can be read with [`rcl_last_error_message`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rcl::asymptotics::{ks_distance, limit_distribution, LimitDistribution};
use rcl::btl::{solve_btl, BTLInstance};
use rcl::error::Error;
use rcl::solver::{solve_finite_n, RewardVector, SolverConfig};
use rcl::utility::UtilitySpec;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RclStatus {
    Ok = 0,
    InvalidUtility = 1,
    InvalidInput = 2,
    BadInit = 3,
    /// The solver stopped early; the partial result is still returned.
    NotConverged = 4,
    Inapplicable = 5,
    Quadrature = 6,
    Io = 7,
    NullPointer = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A parsed utility function.
pub struct RclUtility {
    spec: UtilitySpec,
}

/// A reward vector with its solver diagnostics.
pub struct RclRewards {
    inner: RewardVector,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RclSolverConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RclSolveInfo {
    pub objective: f64,
    pub iterations: usize,
    pub grad_norm_final: f64,
    pub converged: bool,
    pub unique: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RclStatus {
    match e {
        Error::InvalidUtility(_) => RclStatus::InvalidUtility,
        Error::InvalidInput(_) => RclStatus::InvalidInput,
        Error::BadInit => RclStatus::BadInit,
        Error::NotConverged { .. } => RclStatus::NotConverged,
        Error::Inapplicable(_) => RclStatus::Inapplicable,
        Error::Quadrature { .. } => RclStatus::Quadrature,
        Error::Io(_) => RclStatus::Io,
        Error::Prompt { source, .. } => status_of(source),
    }
}

fn fail(e: Error) -> RclStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> RclStatus {
    set_error(&format!("{what} is NULL"));
    RclStatus::NullPointer
}

/// Runs `f`, turning a panic into [`RclStatus::Panic`].
fn guarded(f: impl FnOnce() -> RclStatus) -> RclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            RclStatus::Panic
        }
    }
}

fn config(cfg: *const RclSolverConfig) -> SolverConfig {
    let mut out = SolverConfig::default();
    // SAFETY: callers pass NULL or a pointer to a live config.
    if let Some(c) = unsafe { cfg.as_ref() } {
        out.grad_tol = c.grad_tol;
        out.max_iters = c.max_iters;
    }
    out
}

/// Stores a solve result in `*out`. A non-converged run still hands back its
/// partial rewards.
///
/// # Safety
/// `out` must be valid for writes.
unsafe fn store(result: rcl::error::Result<RewardVector>, out: *mut *mut RclRewards) -> RclStatus {
    let (rv, status) = match result {
        Ok(rv) => (rv, RclStatus::Ok),
        Err(Error::NotConverged { iterations, residual, partial }) => {
            let e = Error::NotConverged {
                iterations,
                residual,
                partial: partial.clone(),
            };
            set_error(&e.to_string());
            (*partial, RclStatus::NotConverged)
        }
        Err(e) => return fail(e),
    };
    *out = Box::into_raw(Box::new(RclRewards { inner: rv }));
    status
}

/// Solver defaults: tolerance 1e-8, 50 000 iterations.
#[no_mangle]
pub extern "C" fn rcl_solver_config_default() -> RclSolverConfig {
    let d = SolverConfig::default();
    RclSolverConfig {
        grad_tol: d.grad_tol,
        max_iters: d.max_iters,
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rcl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn rcl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a spec such as `power:gamma=0.5` or `negpow:gamma=1,ext=appendixA`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rcl_utility_parse(spec: *const c_char, out: *mut *mut RclUtility) -> RclStatus {
    guarded(|| {
        if spec.is_null() {
            return null("spec");
        }
        if out.is_null() {
            return null("out");
        }
        let Ok(s) = CStr::from_ptr(spec).to_str() else {
            set_error("spec is not UTF-8");
            return RclStatus::InvalidUtility;
        };
        match s.parse::<UtilitySpec>() {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(RclUtility { spec }));
                RclStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `u` must be NULL or a handle from [`rcl_utility_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rcl_utility_free(u: *mut RclUtility) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// U(x). Singular families give -inf at x = 0.
///
/// # Safety
/// `u` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rcl_utility_eval(u: *const RclUtility, x: f64, out: *mut f64) -> RclStatus {
    guarded(|| {
        let (Some(u), false) = (u.as_ref(), out.is_null()) else {
            return null("utility or out");
        };
        *out = u.spec.eval(x);
        RclStatus::Ok
    })
}

/// Optimal rewards for n ranked completions. `cfg` may be NULL for defaults.
///
/// # Safety
/// `u` must be a live handle, `cfg` NULL or valid, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rcl_solve(
    u: *const RclUtility,
    n: usize,
    cfg: *const RclSolverConfig,
    out: *mut *mut RclRewards,
) -> RclStatus {
    guarded(|| {
        let (Some(u), false) = (u.as_ref(), out.is_null()) else {
            return null("utility or out");
        };
        store(solve_finite_n(&u.spec, n, &config(cfg)), out)
    })
}

/// Rewards for Bradley–Terry–Luce scores `thetas[0..n]`.
///
/// # Safety
/// `thetas` must point to n readable doubles; other pointers as for [`rcl_solve`].
#[no_mangle]
pub unsafe extern "C" fn rcl_solve_btl(
    u: *const RclUtility,
    thetas: *const f64,
    n: usize,
    cfg: *const RclSolverConfig,
    out: *mut *mut RclRewards,
) -> RclStatus {
    guarded(|| {
        let (Some(u), false, false) = (u.as_ref(), thetas.is_null(), out.is_null()) else {
            return null("utility, thetas or out");
        };
        let th = std::slice::from_raw_parts(thetas, n).to_vec();
        let inst = match BTLInstance::new(th) {
            Ok(i) => i,
            Err(e) => return fail(e),
        };
        store(solve_btl(&u.spec, &inst, &config(cfg)), out)
    })
}

/// # Safety
/// `r` must be NULL or a handle from a solve not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rcl_rewards_free(r: *mut RclRewards) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of rewards; 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rcl_rewards_len(r: *const RclRewards) -> usize {
    r.as_ref().map_or(0, |r| r.inner.len())
}

/// Copies the rewards into `buf`, which holds `cap` doubles.
///
/// # Safety
/// `r` must be a live handle and `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn rcl_rewards_copy(r: *const RclRewards, buf: *mut f64, cap: usize) -> RclStatus {
    guarded(|| {
        let (Some(r), false) = (r.as_ref(), buf.is_null()) else {
            return null("rewards or buf");
        };
        let src = &r.inner.rewards;
        if cap < src.len() {
            set_error(&format!("buffer holds {cap} values, need {}", src.len()));
            return RclStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        RclStatus::Ok
    })
}

/// # Safety
/// `r` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rcl_rewards_info(r: *const RclRewards, out: *mut RclSolveInfo) -> RclStatus {
    guarded(|| {
        let (Some(r), false) = (r.as_ref(), out.is_null()) else {
            return null("rewards or out");
        };
        let v = &r.inner;
        *out = RclSolveInfo {
            objective: v.objective,
            iterations: v.iterations,
            grad_norm_final: v.grad_norm_final,
            converged: v.converged,
            unique: v.unique,
        };
        RclStatus::Ok
    })
}

/// Shape parameters of the Beta limit law. Fails with
/// [`RclStatus::Inapplicable`] when only an endpoint-mass bound is known or
/// the utility is extended.
///
/// # Safety
/// `u` must be a live handle; `alpha` and `beta` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rcl_limit_beta(u: *const RclUtility, alpha: *mut f64, beta: *mut f64) -> RclStatus {
    guarded(|| {
        let (Some(u), false, false) = (u.as_ref(), alpha.is_null(), beta.is_null()) else {
            return null("utility, alpha or beta");
        };
        match limit_distribution(&u.spec) {
            Ok(LimitDistribution::Beta(p)) => {
                *alpha = p.alpha;
                *beta = p.beta;
                RclStatus::Ok
            }
            Ok(LimitDistribution::EndpointMassBound { mass_lower_bound, .. }) => {
                set_error(&format!(
                    "no closed-form law; endpoint masses are at least {mass_lower_bound}"
                ));
                RclStatus::Inapplicable
            }
            Err(e) => fail(e),
        }
    })
}

/// KS distance between `samples[0..n]` and the limit law of `u`.
///
/// # Safety
/// `samples` must point to n readable doubles; `u` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcl_ks_distance(
    samples: *const f64,
    n: usize,
    u: *const RclUtility,
    out: *mut f64,
) -> RclStatus {
    guarded(|| {
        let (Some(u), false, false) = (u.as_ref(), samples.is_null(), out.is_null()) else {
            return null("samples, utility or out");
        };
        let xs = std::slice::from_raw_parts(samples, n);
        match limit_distribution(&u.spec).and_then(|law| ks_distance(xs, &law)) {
            Ok(d) => {
                *out = d;
                RclStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
