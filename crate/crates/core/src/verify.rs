//! The invariant suite behind `rcl verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    endpoint_mass_fraction, flatness_deviation, flatness_profile, ks_distance, ks_distance_cells,
    limit_distribution, BetaParams, LimitDistribution,
};
use crate::btl::{check_continuity_bound, order_inversions, solve_btl, BTLInstance};
use crate::error::Result;
use crate::measure::{empirical_expected_utility, optimize_measure};
use crate::promptlab::{collapse_experiment, generate_prompts, PromptAwarePolicy};
use crate::solver::{brute_force_oracle, solve_finite_n, SolverConfig};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("solver.symmetry", symmetry),
    ("solver.monotone_order", monotone_order),
    ("solver.endpoint_pinning", endpoint_pinning),
    ("solver.ascent", ascent),
    ("solver.oracle_dominance", oracle_dominance),
    ("asymptotics.power_limit", power_limit),
    ("asymptotics.neg_power_and_log_limit", neg_power_and_log_limit),
    ("asymptotics.endpoint_mass", endpoint_mass),
    ("asymptotics.flatness", flatness),
    ("measure.cross_oracle", measure_cross_oracle),
    ("measure.symmetry", measure_symmetry),
    ("btl.order_preservation", btl_order),
    ("btl.shift_invariance", btl_shift),
    ("btl.continuity_bound", btl_bound),
    ("promptlab.collapse", collapse),
];

/// Runs every check; failures are reported, never raised.
pub fn run_all() -> VerifyReport {
    let checks: Vec<Check> = CHECKS
        .par_iter()
        .map(|(name, f)| {
            let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            Check {
                name: (*name).to_string(),
                passed,
                detail,
            }
        })
        .collect();
    VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

pub fn families() -> Vec<UtilitySpec> {
    [
        "power:gamma=0.2",
        "power:gamma=0.5",
        "power:gamma=0.8",
        "negpow:gamma=1",
        "negpow:gamma=0.5",
        "negpow:gamma=1,ext=appendixA",
        "log",
        "log:ext=appendixA",
        "logsigmoid:sigma=1",
        "logsigmoid:sigma=0.25",
        "linear",
    ]
    .iter()
    .map(|s| s.parse().expect("valid family"))
    .collect()
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn symmetry() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for u in families().iter().filter(|u| u.is_strictly_concave()) {
        for n in [8, 51, 100] {
            let r = solve_finite_n(u, n, &cfg())?.rewards;
            for i in 0..n {
                worst = worst.max((r[i] + r[n - 1 - i] - 1.0).abs());
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |r_i + r_(n+1-i) - 1| = {worst:.3e}")))
}

fn monotone_order() -> Result<(bool, String)> {
    let mut bad = Vec::new();
    for u in families() {
        for n in [8, 51, 100] {
            let r = solve_finite_n(&u, n, &cfg())?.rewards;
            if r.windows(2).any(|w| w[0] < w[1]) {
                bad.push(format!("{u} n={n}"));
            }
        }
    }
    Ok((bad.is_empty(), format!("increasing steps in: {bad:?}")))
}

fn endpoint_pinning() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for u in families() {
        let r = solve_finite_n(&u, 30, &cfg())?.rewards;
        worst = worst.max((r[0] - 1.0).abs()).max(r[29].abs());
    }
    Ok((worst <= 1e-8, format!("max endpoint offset {worst:.3e}")))
}

fn ascent() -> Result<(bool, String)> {
    let mut bad = Vec::new();
    for u in families() {
        let r = solve_finite_n(&u, 60, &cfg())?;
        // steps below the rounding error of S are judged by the residual instead
        let slack = 1e-13 * (r.objective.abs() + 1.0);
        if r.trace.windows(2).any(|w| w[1] < w[0] - slack) {
            bad.push(u.to_string());
        }
    }
    Ok((bad.is_empty(), format!("non-monotone traces: {bad:?}")))
}

fn oracle_dominance() -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for u in families() {
        for (n, m) in [(3, 201), (4, 101)] {
            let s = solve_finite_n(&u, n, &cfg())?.objective;
            let o = brute_force_oracle(&u, n, m)?.best.objective;
            worst = worst.min(s - o);
        }
    }
    Ok((worst >= -1e-4, format!("min solver - oracle = {worst:.3e}")))
}

fn ks_at(u: &UtilitySpec, n: usize) -> Result<f64> {
    let r = solve_finite_n(u, n, &cfg())?;
    ks_distance(&r.rewards, &limit_distribution(u)?)
}

fn power_limit() -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for g in [0.2, 0.5, 0.8] {
        let u = UtilitySpec::power(g)?;
        let ks: Vec<f64> = [12, 50, 200].iter().map(|&n| ks_at(&u, n)).collect::<Result<_>>()?;
        ok &= ks[2] <= 0.06 && ks[0] > ks[1] && ks[1] > ks[2];
        detail.push(format!("gamma={g}: {:.4}/{:.4}/{:.4}", ks[0], ks[1], ks[2]));
    }
    Ok((ok, detail.join("; ")))
}

fn neg_power_and_log_limit() -> Result<(bool, String)> {
    let ext = UtilitySpec::neg_power(1.0)?.with_appendix_a(0.01)?;
    let r = solve_finite_n(&ext, 200, &cfg())?;
    let uniform = LimitDistribution::Beta(BetaParams::symmetric(1.0)?);
    let ks_np = ks_distance(&r.rewards, &uniform)?;
    let ks_log = ks_at(&UtilitySpec::log(), 200)?;
    Ok((
        ks_np <= 0.05 && ks_log <= 0.06,
        format!("extended -1/x vs uniform {ks_np:.4}; log vs arcsine {ks_log:.4}"),
    ))
}

fn endpoint_mass() -> Result<(bool, String)> {
    let u = UtilitySpec::log_sigmoid(1.0)?;
    let need = (100.0 / (u.kappa()? + 1.0)).floor();
    let r = solve_finite_n(&u, 100, &cfg())?;
    let (lo, hi) = endpoint_mass_fraction(&r.rewards, 1e-4)?;
    let (lo, hi) = ((lo * 100.0).round(), (hi * 100.0).round());
    Ok((lo >= need && hi >= need, format!("{lo} at 0, {hi} at 1, need {need}")))
}

fn flatness() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for g in [0.2, 0.5, 0.8] {
        worst = worst.max(flatness_deviation(g, 101, 2000)?.max_deviation);
    }
    let control = flatness_profile(BetaParams::symmetric(1.0)?, 0.5, 101, 2000)?.max_deviation;
    Ok((
        worst <= 1e-3 && control >= 0.05,
        format!("max deviation {worst:.3e}; uniform control {control:.4}"),
    ))
}

fn measure_cross_oracle() -> Result<(bool, String)> {
    let u = UtilitySpec::power(0.5)?;
    let opt = optimize_measure(&u, 201, &cfg())?;
    let ks = ks_distance_cells(&opt.measure.grid, &opt.measure.weights, &limit_distribution(&u)?)?;
    let plug_in = empirical_expected_utility(&solve_finite_n(&u, 201, &cfg())?.rewards, &u);
    let diff = (opt.objective - plug_in).abs();
    Ok((
        ks <= 0.05 && diff <= 5e-3,
        format!("cell KS {ks:.4}; |objective - plug-in| {diff:.3e}"),
    ))
}

fn measure_symmetry() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for s in ["power:gamma=0.5", "logsigmoid:sigma=1", "negpow:gamma=1,ext=appendixA"] {
        let u: UtilitySpec = s.parse()?;
        worst = worst.max(optimize_measure(&u, 101, &cfg())?.measure.asymmetry());
    }
    Ok((worst <= 1e-12, format!("max asymmetry {worst:.3e}")))
}

fn btl_instances() -> Result<Vec<BTLInstance>> {
    let mut out = vec![BTLInstance::preset_left(), BTLInstance::preset_right()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(3..=20);
        out.push(BTLInstance::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect())?);
    }
    Ok(out)
}

fn btl_utilities() -> Vec<UtilitySpec> {
    ["power:gamma=0.5", "logsigmoid:sigma=1", "negpow:gamma=1,ext=appendixA", "log:ext=appendixA"]
        .iter()
        .map(|s| s.parse().expect("valid"))
        .collect()
}

fn btl_order() -> Result<(bool, String)> {
    let mut inversions = 0;
    let mut runs = 0;
    for inst in btl_instances()? {
        for u in btl_utilities() {
            let r = solve_btl(&u, &inst, &cfg())?;
            inversions += order_inversions(&r.rewards, &inst).len();
            runs += 1;
        }
    }
    Ok((inversions == 0, format!("{inversions} inversions over {runs} runs")))
}

fn btl_shift() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for u in btl_utilities() {
        let inst = BTLInstance::preset_right();
        let shifted = BTLInstance::new(inst.thetas.iter().map(|t| t + 2.5).collect())?;
        let a = solve_btl(&u, &inst, &cfg())?.rewards;
        let b = solve_btl(&u, &shifted, &cfg())?.rewards;
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok((worst <= 1e-7, format!("max reward change {worst:.3e}")))
}

fn btl_bound() -> Result<(bool, String)> {
    let mut violations = 0;
    let mut applicable = 0;
    for inst in btl_instances()? {
        for u in btl_utilities() {
            let r = solve_btl(&u, &inst, &cfg())?;
            let rep = check_continuity_bound(&r.rewards, &inst, &u)?;
            if rep.applicable {
                applicable += 1;
                violations += rep.violations.len();
            }
        }
    }
    Ok((
        violations == 0,
        format!("{violations} violations over {applicable} applicable runs"),
    ))
}

fn collapse() -> Result<(bool, String)> {
    let prompts = generate_prompts(16, 0)?;
    let fixed = UtilitySpec::log_sigmoid(1.0)?;
    let r = collapse_experiment(&prompts, &fixed, &PromptAwarePolicy::default(), 8)?;
    Ok((
        r.collapse_gap_fixed == 0.0 && r.separation_gap_aware >= 0.3,
        format!(
            "fixed gap {}; aware gap {:.4}",
            r.collapse_gap_fixed, r.separation_gap_aware
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let report = run_all();
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(report.passed);
        assert_eq!(report.checks.len(), CHECKS.len());
    }
}
