//! Rewards from Bradley–Terry–Luce preference probabilities.
//!
//! ```text
//! S(r) = Σ_{i ≠ j} U(r_i − r_j) · sigmoid(θ_i − θ_j)   over r ∈ [0, 1]^n
//! ```
//!
//! Both orderings of every pair appear, so U is evaluated on [−1, 1] and must
//! be finite there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::engine::{self, Pair, PairProblem};
use crate::solver::{RewardVector, SolverConfig, MAX_N};
use crate::utility::{sigmoid, Family, UtilitySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTLInstance {
    pub thetas: Vec<f64>,
    pub theta_max: f64,
}

impl BTLInstance {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.len() < 2 || thetas.len() > MAX_N {
            return Err(Error::InvalidInput(format!(
                "need between 2 and {MAX_N} scores, got {}",
                thetas.len()
            )));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("scores must be finite".into()));
        }
        let theta_max = thetas.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
        Ok(Self { thetas, theta_max })
    }

    /// n = 20: θ_i = i/20 for i ≤ 15 and (i + 10)/6 above.
    pub fn preset_left() -> Self {
        Self::piecewise(15, 20.0)
    }

    /// n = 20: θ_i = i/10 for i ≤ 5 and (i + 10)/6 above.
    pub fn preset_right() -> Self {
        Self::piecewise(5, 10.0)
    }

    fn piecewise(knee: usize, slope_den: f64) -> Self {
        let thetas = (1..=20)
            .map(|i| {
                let i = i as f64;
                if i <= knee as f64 {
                    i / slope_den
                } else {
                    (i + 10.0) / 6.0
                }
            })
            .collect();
        Self::new(thetas).expect("presets are valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "left" => Ok(Self::preset_left()),
            "right" => Ok(Self::preset_right()),
            other => Err(Error::InvalidInput(format!(
                "unknown preset {other:?} (expected left or right)"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Indices sorted by decreasing θ; ties keep index order.
    fn by_score(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.thetas[b].total_cmp(&self.thetas[a]));
        idx
    }
}

/// S(r) with both orderings of each pair.
pub fn btl_objective(u: &UtilitySpec, inst: &BTLInstance, r: &[f64]) -> f64 {
    let th = &inst.thetas;
    let mut total = 0.0;
    for i in 0..r.len() {
        for j in 0..r.len() {
            if i != j {
                total += u.eval(r[i] - r[j]) * sigmoid(th[i] - th[j]);
            }
        }
    }
    total
}

pub fn solve_btl(u: &UtilitySpec, inst: &BTLInstance, cfg: &SolverConfig) -> Result<RewardVector> {
    cfg.validate()?;
    if !u.is_finite_on_interval() {
        return Err(Error::InvalidUtility(format!(
            "{u} is not finite on [-1, 1]; enable the extension"
        )));
    }
    let n = inst.len();
    let th = &inst.thetas;
    let pairs = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| Pair {
            i,
            j,
            fwd: sigmoid(th[i] - th[j]),
            bwd: sigmoid(th[j] - th[i]),
        })
        .collect();
    let problem = PairProblem { u, n, pairs };

    // stagger the start by score rank and mirror the upper half, which is
    // where rewards pile up against 1
    let order = inst.by_score();
    let mut init = vec![0.0; n];
    let mut flipped = vec![false; n];
    for (rank, &i) in order.iter().enumerate() {
        init[i] = (n - 1 - rank) as f64 / (n - 1) as f64;
        flipped[i] = rank < n / 2;
    }
    if let crate::solver::Init::Custom(v) = &cfg.init {
        if v.len() != n {
            return Err(Error::InvalidInput(format!(
                "custom init has {} entries, expected {n}",
                v.len()
            )));
        }
        init.clone_from(v);
    }

    let out = engine::maximize(&problem, &init, flipped, cfg.engine())?;
    let rv = RewardVector {
        rewards: out.rewards,
        objective: out.objective,
        iterations: out.iterations,
        grad_norm_final: out.residual,
        converged: out.converged,
        unique: u.is_strictly_concave() && u.is_concave_on_interval(),
        trace: out.trace,
    };
    if !rv.converged {
        return Err(Error::NotConverged {
            iterations: rv.iterations,
            residual: rv.grad_norm_final,
            partial: Box::new(rv),
        });
    }
    Ok(rv)
}

/// Pairs (i, j) with θ_i > θ_j but r_i < r_j.
pub fn order_inversions(rewards: &[f64], inst: &BTLInstance) -> Vec<(usize, usize)> {
    let th = &inst.thetas;
    let mut out = Vec::new();
    for i in 0..rewards.len() {
        for j in 0..rewards.len() {
            if th[i] > th[j] && rewards[i] < rewards[j] {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConcavityMethod {
    Analytic,
    GridMinNegSecondDeriv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongConcavityEstimate {
    pub mu: f64,
    pub method: ConcavityMethod,
    /// Interval the minimum of −U″ was taken over.
    pub domain: (f64, f64),
    /// True when `domain` is narrower than [−1, 1]: U is singular at 0, or
    /// U is the extended −1/x and μ describes its x > 0 branch only.
    pub restricted: bool,
}

/// Restricted probe interval for families that are not strongly concave on all of [−1, 1].
fn probe_domain(u: &UtilitySpec) -> ((f64, f64), bool) {
    match u.family() {
        Family::Power | Family::NegPower => ((1e-4, 1.0), true),
        // the extended log is linear for x ≤ 0, so it stays on the full interval
        Family::Log if u.is_extended() => ((-1.0, 1.0), false),
        Family::Log => ((1e-4, 1.0), true),
        Family::LogSigmoid | Family::Linear => ((-1.0, 1.0), false),
    }
}

/// min of −U″ in closed form. Every −U″ here is monotone in |x| on the probe
/// domain, so the minimum sits at x = ±1.
pub fn strong_concavity(u: &UtilitySpec) -> StrongConcavityEstimate {
    let g = u.gamma();
    let e = if u.is_extended() { u.epsilon() } else { 0.0 };
    let mu = match u.family() {
        Family::Power => g * (1.0 - g),
        Family::NegPower => g * (g + 1.0) * (1.0 + e).powf(-g - 2.0),
        Family::Log if u.is_extended() => 0.0,
        Family::Log => 1.0,
        Family::LogSigmoid => {
            let s = u.sigma();
            sigmoid(1.0 / s) * sigmoid(-1.0 / s) / (s * s)
        }
        Family::Linear => 0.0,
    };
    let (domain, restricted) = probe_domain(u);
    StrongConcavityEstimate {
        mu,
        method: ConcavityMethod::Analytic,
        domain,
        restricted,
    }
}

/// min of −U″ over `points` equispaced points of the probe domain.
pub fn strong_concavity_grid(u: &UtilitySpec, points: usize) -> StrongConcavityEstimate {
    let ((lo, hi), restricted) = probe_domain(u);
    let last = (points.max(2) - 1) as f64;
    let mu = (0..points.max(2))
        .map(|k| lo + (hi - lo) * k as f64 / last)
        .map(|x| -u.second_deriv(x))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    StrongConcavityEstimate {
        mu,
        method: ConcavityMethod::GridMinNegSecondDeriv,
        domain: (lo, hi),
        restricted,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairViolation {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub applicable: bool,
    /// Why the bound was not evaluated.
    pub reason: Option<String>,
    pub mu: f64,
    pub u_at_one: f64,
    pub theta_max: f64,
    /// min over pairs of bound − |r_i − r_j|; negative means a violation.
    pub worst_slack: f64,
    pub violations: Vec<PairViolation>,
}

/// |r_i − r_j| ≤ 2 √(U(1)(1 + e^{θmax}) |θ_i − θ_j| / μ) for every pair.
pub fn check_continuity_bound(rewards: &[f64], inst: &BTLInstance, u: &UtilitySpec) -> Result<BoundReport> {
    if rewards.len() != inst.len() {
        return Err(Error::InvalidInput(format!(
            "{} rewards for {} scores",
            rewards.len(),
            inst.len()
        )));
    }
    let mu = strong_concavity(u).mu;
    let u1 = u.eval(1.0);
    let mut report = BoundReport {
        applicable: false,
        reason: None,
        mu,
        u_at_one: u1,
        theta_max: inst.theta_max,
        worst_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    if !(mu > 0.0) {
        report.reason = Some("U is not strongly concave (mu = 0)".into());
        return Ok(report);
    }
    if !(u1 > 0.0) {
        report.reason = Some(format!("U(1) = {u1} is not positive"));
        return Ok(report);
    }
    report.applicable = true;
    let scale = u1 * (1.0 + inst.theta_max.exp()) / mu;
    let th = &inst.thetas;
    for i in 0..rewards.len() {
        for j in i + 1..rewards.len() {
            let gap = (rewards[i] - rewards[j]).abs();
            let bound = 2.0 * (scale * (th[i] - th[j]).abs()).sqrt();
            report.worst_slack = report.worst_slack.min(bound - gap);
            if gap > bound {
                report.violations.push(PairViolation { i, j, gap, bound });
            }
        }
    }
    Ok(report)
}
