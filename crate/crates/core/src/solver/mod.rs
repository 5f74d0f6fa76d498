//! The finite-n interpolation program
//!
//! ```text
//! max  Σ_{1≤i<j≤n} U(r_i − r_j)   over   0 ≤ r_n ≤ … ≤ r_1 ≤ 1
//! ```
//!
//! For a strictly increasing U the optimum has r_1 = 1 and r_n = 0, so the
//! solver works on the n − 1 consecutive gaps (see `ordered`), where the order
//! constraints become simple bounds. The result is still checked for order.

pub(crate) mod engine;
mod ordered;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::UtilitySpec;
use engine::EngineSettings;

pub const MAX_N: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// r_i = (n − i)/(n − 1): strictly separated, so singular utilities start finite.
    Staggered,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the projected gradient norm drops to this value.
    pub grad_tol: f64,
    pub init: Init,
    /// Pair gaps below this are moved out to it before derivatives of a
    /// utility with U′(0⁺) = ∞ are evaluated.
    pub min_gap: f64,
    /// Echoed in reports; every solver in this crate is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            grad_tol: 1e-8,
            init: Init::Staggered,
            min_gap: 1e-150,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidInput("grad_tol must be > 0".into()));
        }
        if !(self.min_gap > 0.0) {
            return Err(Error::InvalidInput("min_gap must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn engine(&self) -> EngineSettings {
        EngineSettings {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            min_gap: self.min_gap,
        }
    }

    pub(crate) fn initial_point(&self, n: usize) -> Result<Vec<f64>> {
        match &self.init {
            Init::Staggered => Ok(staggered(n)),
            Init::Custom(v) if v.len() == n => Ok(v.clone()),
            Init::Custom(v) => Err(Error::InvalidInput(format!(
                "custom init has {} entries, expected {n}",
                v.len()
            ))),
        }
    }
}

pub(crate) fn staggered(n: usize) -> Vec<f64> {
    (0..n).map(|i| (n - 1 - i) as f64 / (n - 1) as f64).collect()
}

/// A finite-n optimum with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub rewards: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub grad_norm_final: f64,
    pub converged: bool,
    /// False when U is not strictly concave and the optimum need not be
    /// unique; the mirror-symmetric maximizer is returned in that case.
    pub unique: bool,
    /// Objective after each accepted step, starting with the initial point.
    /// Nondecreasing up to the rounding error of evaluating S itself: once
    /// progress drops below that, steps are accepted on a falling residual.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl RewardVector {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// A bare vector (no solver run behind it), e.g. rewards read from disk.
    pub fn from_rewards(rewards: Vec<f64>) -> Self {
        Self {
            rewards,
            objective: f64::NAN,
            iterations: 0,
            grad_norm_final: f64::NAN,
            converged: true,
            unique: true,
            trace: Vec::new(),
        }
    }
}

/// S(r) = Σ_{i<j} U(r_i − r_j). Returns −∞ as soon as one term is −∞.
pub fn objective(u: &UtilitySpec, r: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            let v = u.eval(r[i] - r[j]);
            if v == f64::NEG_INFINITY {
                return v;
            }
            total += v;
        }
    }
    total
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
    }
    if n > MAX_N {
        return Err(Error::InvalidInput(format!("n must be <= {MAX_N}, got {n}")));
    }
    Ok(())
}

/// Map a feasible start onto one with r_1 = 1 and r_n = 0.
///
/// The affine stretch only widens differences, so it never lowers the
/// objective of an increasing U. An all-equal start becomes the staggered one.
fn start_point(u: &UtilitySpec, r: Vec<f64>) -> Result<Vec<f64>> {
    if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput("initial point must lie in [0, 1]".into()));
    }
    if objective(u, &r) == f64::NEG_INFINITY {
        return Err(Error::BadInit);
    }
    if r.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("initial point must be nonincreasing".into()));
    }
    let n = r.len();
    let (hi, lo) = (r[0], r[n - 1]);
    if hi == lo {
        return Ok(staggered(n));
    }
    let mut out: Vec<f64> = r.iter().map(|&v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
    out[0] = 1.0;
    out[n - 1] = 0.0;
    Ok(out)
}

/// Solve the ordered interpolation program for n responses.
///
/// Non-convergence is returned as [`Error::NotConverged`] carrying the last
/// iterate.
pub fn solve_finite_n(u: &UtilitySpec, n: usize, cfg: &SolverConfig) -> Result<RewardVector> {
    check_n(n)?;
    cfg.validate()?;
    let init = start_point(u, cfg.initial_point(n)?)?;
    let out = ordered::maximize(u, &init, cfg.engine())?;

    if let Some(k) = (1..n).find(|&k| out.rewards[k] > out.rewards[k - 1] + 1e-9) {
        return Err(Error::InvalidInput(format!(
            "solution is not ordered at index {k}: {} < {}",
            out.rewards[k - 1],
            out.rewards[k]
        )));
    }

    let mut rv = RewardVector {
        rewards: out.rewards,
        objective: out.objective,
        iterations: out.iterations,
        grad_norm_final: out.residual,
        converged: out.converged,
        unique: u.is_strictly_concave(),
        trace: out.trace,
    };
    if rv.converged && !rv.unique {
        central_optimum(u, &mut rv);
    }
    if !rv.converged {
        return Err(Error::NotConverged {
            iterations: rv.iterations,
            residual: rv.grad_norm_final,
            partial: Box::new(rv),
        });
    }
    Ok(rv)
}

/// S is unchanged by r ↦ 1 − reverse(r) and its maximizers form a convex set,
/// so when they are not unique the average of an optimum and its mirror is
/// again optimal. That symmetric one is reported.
fn central_optimum(u: &UtilitySpec, rv: &mut RewardVector) {
    let r = &rv.rewards;
    let n = r.len();
    let mut sym = vec![0.5; n];
    for i in 0..n / 2 {
        sym[i] = 0.5 * (r[i] + 1.0 - r[n - 1 - i]);
        sym[n - 1 - i] = 1.0 - sym[i];
    }
    let f = objective(u, &sym);
    if f >= rv.objective - 1e-12 * (rv.objective.abs() + 1.0) {
        rv.rewards = sym;
        rv.objective = f;
        rv.trace.push(f);
    }
}

/// Result of the exhaustive grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: RewardVector,
    /// Every grid tuple whose objective ties the best one.
    pub ties: Vec<Vec<f64>>,
}

/// Exhaustive search over ordered grid tuples with r_1 = 1 and r_n = 0 fixed.
/// Independent of the Newton solver; only usable for n ≤ 4.
pub fn brute_force_oracle(u: &UtilitySpec, n: usize, grid_m: usize) -> Result<OracleResult> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "brute force supports 2 <= n <= 4, got {n}"
        )));
    }
    if !(2..=501).contains(&grid_m) {
        return Err(Error::InvalidInput(format!(
            "grid_m must lie in 2..=501, got {grid_m}"
        )));
    }
    let grid: Vec<f64> = (0..grid_m)
        .map(|k| k as f64 / (grid_m - 1) as f64)
        .collect();

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    match n {
        2 => candidates.push(vec![1.0, 0.0]),
        3 => candidates.extend(grid.iter().map(|&a| vec![1.0, a, 0.0])),
        _ => {
            for (ia, &a) in grid.iter().enumerate() {
                for &b in &grid[..=ia] {
                    candidates.push(vec![1.0, a, b, 0.0]);
                }
            }
        }
    }

    let scored: Vec<(f64, Vec<f64>)> = candidates
        .into_iter()
        .map(|r| (objective(u, &r), r))
        .filter(|(v, _)| v.is_finite())
        .collect();
    let best = scored
        .iter()
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::InvalidInput(format!(
            "no grid tuple has a finite objective for {u}"
        )));
    }
    let tol = 1e-12 * (1.0 + best.abs());
    let ties: Vec<Vec<f64>> = scored
        .iter()
        .filter(|(v, _)| *v >= best - tol)
        .map(|(_, r)| r.clone())
        .collect();
    let best_r = ties[0].clone();
    Ok(OracleResult {
        best: RewardVector {
            rewards: best_r,
            objective: best,
            iterations: 0,
            grad_norm_final: f64::NAN,
            converged: true,
            unique: ties.len() == 1,
            trace: Vec::new(),
        },
        ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn objective_examples() {
        assert_relative_eq!(objective(&UtilitySpec::linear(), &[1.0, 0.0]), 1.0);
        let p = UtilitySpec::power(0.5).unwrap();
        let expect = 0.5f64.sqrt() * 2.0 + 1.0;
        assert_relative_eq!(objective(&p, &[1.0, 0.5, 0.0]), expect, epsilon = 1e-12);
        assert_eq!(objective(&UtilitySpec::log(), &[1.0, 1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn two_points_spread_to_the_endpoints() {
        for spec in ["power:gamma=0.3", "log", "linear", "logsigmoid:sigma=1"] {
            let u: UtilitySpec = spec.parse().unwrap();
            let r = solve_finite_n(&u, 2, &cfg()).unwrap();
            assert_eq!(r.rewards, vec![1.0, 0.0], "{spec}");
        }
    }

    #[test]
    fn power_half_three_points() {
        let u = UtilitySpec::power(0.5).unwrap();
        let r = solve_finite_n(&u, 3, &cfg()).unwrap();
        assert!((r.rewards[1] - 0.5).abs() < 1e-9, "{:?}", r.rewards);
        assert_eq!(r.rewards[0], 1.0);
        assert_eq!(r.rewards[2], 0.0);
    }

    #[test]
    fn log_sigmoid_pins_a_third_at_each_end() {
        let u = UtilitySpec::log_sigmoid(1.0).unwrap();
        let r = solve_finite_n(&u, 100, &cfg()).unwrap();
        assert!(r.rewards[..34].iter().all(|&v| (v - 1.0).abs() <= 1e-4));
        assert!(r.rewards[66..].iter().all(|&v| v.abs() <= 1e-4));
    }

    #[test]
    fn bad_init_is_an_error() {
        let mut c = cfg();
        c.init = Init::Custom(vec![1.0, 0.5, 0.5, 0.0]);
        assert!(matches!(
            solve_finite_n(&UtilitySpec::log(), 4, &c),
            Err(Error::BadInit)
        ));
    }

    #[test]
    fn custom_start_reaches_the_same_optimum() {
        let u = UtilitySpec::power(0.5).unwrap();
        let base = solve_finite_n(&u, 9, &cfg()).unwrap();
        let mut c = cfg();
        c.init = Init::Custom(vec![0.9, 0.8, 0.75, 0.6, 0.5, 0.45, 0.3, 0.2, 0.1]);
        let other = solve_finite_n(&u, 9, &c).unwrap();
        for (a, b) in base.rewards.iter().zip(&other.rewards) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        c.init = Init::Custom(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert!(matches!(solve_finite_n(&u, 9, &c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_sizes() {
        let u = UtilitySpec::linear();
        assert!(solve_finite_n(&u, 1, &cfg()).is_err());
        assert!(solve_finite_n(&u, MAX_N + 1, &cfg()).is_err());
        let mut c = cfg();
        c.init = Init::Custom(vec![0.5; 3]);
        assert!(solve_finite_n(&u, 4, &c).is_err());
    }

    #[test]
    fn iteration_budget_is_reported() {
        let mut c = cfg();
        c.max_iters = 1;
        let u = UtilitySpec::power(0.8).unwrap();
        match solve_finite_n(&u, 60, &c) {
            Err(Error::NotConverged {
                iterations,
                residual,
                partial,
            }) => {
                assert_eq!(iterations, 1);
                assert!(residual > c.grad_tol);
                assert_eq!(partial.len(), 60);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn linear_is_flagged_non_unique() {
        let r = solve_finite_n(&UtilitySpec::linear(), 5, &cfg()).unwrap();
        assert!(!r.unique);
        assert_eq!(r.rewards[..2], [1.0, 1.0]);
        assert_eq!(r.rewards[3..], [0.0, 0.0]);
    }

    #[test]
    fn trace_ascends_up_to_rounding() {
        for spec in ["power:gamma=0.2", "negpow:gamma=1", "logsigmoid:sigma=0.25", "log"] {
            let u: UtilitySpec = spec.parse().unwrap();
            let r = solve_finite_n(&u, 60, &cfg()).unwrap();
            let scale = r.objective.abs() + 1.0;
            for w in r.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-13 * scale, "{spec}: {} -> {}", w[0], w[1]);
            }
            assert!(r.trace.last().unwrap() > &r.trace[0]);
        }
    }

    #[test]
    fn linear_splits_into_halves_for_every_n() {
        // Σ_{i<j} (r_i − r_j) = Σ_i (n + 1 − 2i) r_i, maximal at ⌊n²/4⌋
        for n in 3..=40 {
            let r = solve_finite_n(&UtilitySpec::linear(), n, &cfg()).unwrap();
            assert_relative_eq!(r.objective, ((n * n) / 4) as f64, epsilon = 1e-9);
            assert!(r.rewards[..n / 2].iter().all(|&v| v == 1.0), "n = {n}: {:?}", r.rewards);
            assert!(r.rewards[n - n / 2..].iter().all(|&v| v == 0.0), "n = {n}: {:?}", r.rewards);
            if n % 2 == 1 {
                assert_eq!(r.rewards[n / 2], 0.5);
            }
        }
    }

    #[test]
    fn oracle_linear_reports_the_tie() {
        let o = brute_force_oracle(&UtilitySpec::linear(), 3, 101).unwrap();
        assert_relative_eq!(o.best.objective, 2.0, epsilon = 1e-12);
        assert_eq!(o.ties.len(), 101);
        assert!(!o.best.unique);
    }

    #[test]
    fn oracle_power_half() {
        let o = brute_force_oracle(&UtilitySpec::power(0.5).unwrap(), 3, 201).unwrap();
        assert!((o.best.rewards[1] - 0.5).abs() <= 0.005);
        assert_eq!(o.ties.len(), 1);
    }

    #[test]
    fn oracle_matches_solver_for_extended_negpow() {
        let u: UtilitySpec = "negpow:gamma=1,ext=appendixA".parse().unwrap();
        let o = brute_force_oracle(&u, 4, 101).unwrap();
        let s = solve_finite_n(&u, 4, &cfg()).unwrap();
        assert!((o.best.objective - s.objective).abs() <= 1e-4);
    }

    #[test]
    fn oracle_rejects_large_n() {
        assert!(brute_force_oracle(&UtilitySpec::linear(), 5, 11).is_err());
        assert!(brute_force_oracle(&UtilitySpec::linear(), 3, 502).is_err());
    }
}
