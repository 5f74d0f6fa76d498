use std::path::Path;

use serde::Serialize;

use rcl::asymptotics::{
    endpoint_mass_fraction, flatness_deviation, ks_distance, limit_distribution, FlatnessReport,
    LimitDistribution,
};
use rcl::btl::{
    check_continuity_bound, order_inversions, solve_btl, strong_concavity, BTLInstance, BoundReport,
    StrongConcavityEstimate,
};
use rcl::error::{Error, Result};
use rcl::measure::optimize_measure;
use rcl::promptlab::{collapse_experiment, generate_prompts, PromptAwarePolicy};
use rcl::solver::{solve_finite_n, SolverConfig};
use rcl::utility::UtilitySpec;
use rcl::verify;

use super::output::{emit, read_numbers, Artifacts, Csv};
use super::{Cli, Command, SolveOpts};

fn config(o: &SolveOpts) -> SolverConfig {
    SolverConfig {
        grad_tol: o.tol,
        max_iters: o.max_iters,
        seed: o.seed,
        ..SolverConfig::default()
    }
}

fn utility(s: &str) -> Result<UtilitySpec> {
    s.parse()
}

fn reward_csv(rewards: &[f64]) -> String {
    let mut c = Csv::new(&["rank", "reward"]);
    for (k, r) in rewards.iter().enumerate() {
        c.row(&[&(k + 1), r]);
    }
    c.finish()
}

#[derive(Serialize)]
struct SolveOut<'a> {
    utility: String,
    n: usize,
    rewards: &'a [f64],
    objective: f64,
    iterations: usize,
    grad_norm_final: f64,
    converged: bool,
    unique: bool,
    seed: u64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitOut {
    Ks {
        utility: String,
        n: usize,
        law: LimitDistribution,
        ks: f64,
    },
    Endpoints {
        utility: String,
        n: usize,
        law: LimitDistribution,
        endpoint_tol: f64,
        mass_at_zero: f64,
        mass_at_one: f64,
        bound_met: bool,
    },
}

#[derive(Serialize)]
struct MeasureOut {
    utility: String,
    grid: usize,
    objective: f64,
    fw_gap: f64,
    iterations: usize,
    converged: bool,
    certified: bool,
}

#[derive(Serialize)]
struct BtlOut<'a> {
    utility: String,
    thetas: &'a [f64],
    rewards: &'a [f64],
    objective: f64,
    iterations: usize,
    converged: bool,
    order_ok: bool,
    inversions: Vec<(usize, usize)>,
    strong_concavity: StrongConcavityEstimate,
    bound_report: BoundReport,
}

fn instance(spec: &str) -> Result<BTLInstance> {
    match spec.strip_prefix("preset:") {
        Some(name) => BTLInstance::preset(name),
        None => BTLInstance::new(read_numbers(Path::new(spec), "theta")?),
    }
}

/// Runs the command and emits its artifacts. `Ok(false)` means `verify`
/// found a failing check.
pub fn run(cli: &Cli) -> Result<bool> {
    let (name, artifacts, ok) = match &cli.command {
        Command::Solve { utility: us, n, opts } => {
            let u = utility(us)?;
            let r = solve_finite_n(&u, *n, &config(opts))?;
            let out = SolveOut {
                utility: u.to_string(),
                n: *n,
                rewards: &r.rewards,
                objective: r.objective,
                iterations: r.iterations,
                grad_norm_final: r.grad_norm_final,
                converged: r.converged,
                unique: r.unique,
                seed: opts.seed,
            };
            ("solve", Artifacts::new(&out)?.with_csv(reward_csv(&r.rewards)), true)
        }
        Command::Limit { utility: us } => {
            let law = limit_distribution(&utility(us)?)?;
            ("limit", Artifacts::new(&law)?, true)
        }
        Command::Fit { rewards, utility: us, endpoint_tol } => {
            let u = utility(us)?;
            let r = read_numbers(rewards, "reward")?;
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput("rewards must lie in [0, 1]".into()));
            }
            let law = limit_distribution(&u)?;
            let out = match law {
                LimitDistribution::Beta(_) => FitOut::Ks {
                    utility: u.to_string(),
                    n: r.len(),
                    law,
                    ks: ks_distance(&r, &law)?,
                },
                LimitDistribution::EndpointMassBound { mass_lower_bound, .. } => {
                    let (lo, hi) = endpoint_mass_fraction(&r, *endpoint_tol)?;
                    FitOut::Endpoints {
                        utility: u.to_string(),
                        n: r.len(),
                        law,
                        endpoint_tol: *endpoint_tol,
                        mass_at_zero: lo,
                        mass_at_one: hi,
                        bound_met: lo >= mass_lower_bound && hi >= mass_lower_bound,
                    }
                }
            };
            ("fit", Artifacts::new(&out)?, true)
        }
        Command::Flatness { gamma, c_grid, quad } => {
            let rep: FlatnessReport = flatness_deviation(*gamma, *c_grid, *quad)?;
            let mut c = Csv::new(&["c", "expectation"]);
            for (x, f) in &rep.profile {
                c.row(&[x, f]);
            }
            ("flatness", Artifacts::new(&rep)?.with_csv(c.finish()), true)
        }
        Command::Measure { utility: us, grid, opts } => {
            let u = utility(us)?;
            let opt = optimize_measure(&u, *grid, &config(opts))?;
            let mut c = Csv::new(&["x", "weight"]);
            for (x, w) in opt.measure.grid.iter().zip(&opt.measure.weights) {
                c.row(&[x, w]);
            }
            let out = MeasureOut {
                utility: u.to_string(),
                grid: *grid,
                objective: opt.objective,
                fw_gap: opt.fw_gap,
                iterations: opt.iterations,
                converged: opt.converged,
                certified: opt.certified,
            };
            ("measure", Artifacts::new(&out)?.with_csv(c.finish()), true)
        }
        Command::Btl { utility: us, thetas, opts } => {
            let u = utility(us)?;
            let inst = instance(thetas)?;
            let r = solve_btl(&u, &inst, &config(opts))?;
            let inversions = order_inversions(&r.rewards, &inst);
            let out = BtlOut {
                utility: u.to_string(),
                thetas: &inst.thetas,
                rewards: &r.rewards,
                objective: r.objective,
                iterations: r.iterations,
                converged: r.converged,
                order_ok: inversions.is_empty(),
                inversions,
                strong_concavity: strong_concavity(&u),
                bound_report: check_continuity_bound(&r.rewards, &inst, &u)?,
            };
            let mut c = Csv::new(&["index", "theta", "reward"]);
            for (k, (t, v)) in inst.thetas.iter().zip(&r.rewards).enumerate() {
                c.row(&[&(k + 1), t, v]);
            }
            ("btl", Artifacts::new(&out)?.with_csv(c.finish()), true)
        }
        Command::CollapseDemo { prompts, n, fixed, open, concrete, seed } => {
            let ps = generate_prompts(*prompts, *seed)?;
            let policy = PromptAwarePolicy {
                open_ended_utility: utility(open)?,
                concrete_utility: utility(concrete)?,
            };
            let rep = collapse_experiment(&ps, &utility(fixed)?, &policy, *n)?;
            let mut c = Csv::new(&["prompt_id", "kind", "rank", "reward", "mode"]);
            for o in &rep.prompts {
                for (mode, rewards) in [("fixed", &o.fixed), ("aware", &o.aware)] {
                    for (k, r) in rewards.iter().enumerate() {
                        c.row(&[&o.id, &o.kind.as_str(), &(k + 1), r, &mode]);
                    }
                }
            }
            ("collapse-demo", Artifacts::new(&rep)?.with_csv(c.finish()), true)
        }
        Command::Verify => {
            let rep = verify::run_all();
            let ok = rep.passed;
            ("verify", Artifacts::new(&rep)?, ok)
        }
    };
    emit(&artifacts, cli.output, cli.out.as_deref(), name)?;
    Ok(ok)
}
