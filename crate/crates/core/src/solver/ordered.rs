//! Projected Newton ascent for the ordered program in gap coordinates.
//!
//! With r_1 = 1 and r_n = 0 pinned, a feasible point is described by the n − 1
//! gaps g_k = r_k − r_{k+1} ≥ 0 with Σ g_k = 1. One gap (the pivot) is
//! eliminated through the sum constraint and the others are bound-constrained
//! at zero.
//!
//! In these coordinates every difference r_i − r_j is a sum of positive gaps,
//! and every Hessian entry is a sum of nonnegative pair curvatures. Nothing is
//! ever subtracted, so power utilities whose optimal endpoint gaps are ~1e-20
//! next to O(1) bulk gaps still get an accurate Newton system.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::engine::{EngineSettings, Outcome};
use crate::utility::UtilitySpec;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;
/// When U′(0⁺) = ∞ no optimal gap is zero, so a trial gap may shrink by at
/// most this factor per step instead of being projected onto the bound.
const SHRINK: f64 = 1e-3;

struct Problem<'a> {
    u: &'a UtilitySpec,
    n: usize,
    pivot: usize,
    singular: bool,
    min_gap: f64,
}

impl Problem<'_> {
    /// Pair differences G_ij = g_i + … + g_{j−1} for i < j, row-major upper triangle.
    fn spans(&self, gaps: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in i + 1..n {
                acc += gaps[j - 1];
                out[i * n + j] = acc;
            }
        }
        out
    }

    fn objective(&self, gaps: &[f64]) -> (f64, f64) {
        if gaps.iter().any(|&g| g < 0.0) {
            return (f64::NEG_INFINITY, 0.0);
        }
        let n = self.n;
        let spans = self.spans(gaps);
        let mut total = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let v = self.u.eval(spans[i * n + j]);
                total += v;
                scale += v.abs();
            }
        }
        (total, scale)
    }

    fn clamp_span(&self, d: f64) -> f64 {
        if self.singular && d < self.min_gap {
            self.min_gap
        } else {
            d
        }
    }

    /// Flux T_k = Σ_{i ≤ k < j} U′(G_ij) through every gap; ∂S/∂g_k = T_k − T_pivot.
    fn flux(&self, gaps: &[f64]) -> Vec<f64> {
        let n = self.n;
        let spans = self.spans(gaps);
        let m = n - 1;
        let mut t = vec![0.0; m];
        for i in 0..n {
            // suffix sums over j give Σ_{j > k} U′(G_ij) for every k ≥ i
            let mut acc = 0.0;
            for k in (i..m).rev() {
                acc += self.u.deriv(self.clamp_span(spans[i * n + k + 1]));
                t[k] += acc;
            }
        }
        t
    }

    /// Full (n−1)×(n−1) matrix −∂²S/∂g_k∂g_l = Σ_{i ≤ min(k,l), j > max(k,l)} −U″(G_ij).
    fn curvature(&self, gaps: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let m = n - 1;
        let spans = self.spans(gaps);
        let mut h = DMatrix::<f64>::zeros(m, m);
        // col[l] accumulates Σ_{i ≤ k} Σ_{j > l} c_ij while k sweeps upwards
        let mut col = vec![0.0; m];
        for k in 0..m {
            let mut acc = 0.0;
            for l in (k..m).rev() {
                let c = -self.u.second_deriv(self.clamp_span(spans[k * n + l + 1]));
                acc += if c.is_finite() { c.max(0.0) } else { f64::MAX.sqrt() };
                col[l] += acc;
                h[(k, l)] = col[l];
            }
        }
        for k in 0..m {
            for l in 0..k {
                h[(k, l)] = h[(l, k)];
            }
        }
        h
    }

    fn gradient(&self, gaps: &[f64]) -> Vec<f64> {
        let t = self.flux(gaps);
        let tp = t[self.pivot];
        t.iter()
            .enumerate()
            .map(|(k, &tk)| if k == self.pivot { 0.0 } else { tk - tp })
            .collect()
    }

    fn with_pivot(&self, gaps: &mut [f64]) {
        let rest: f64 = gaps
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != self.pivot)
            .map(|(_, &g)| g)
            .sum();
        gaps[self.pivot] = 1.0 - rest;
    }
}

fn residual(gaps: &[f64], grad: &[f64], pivot: usize) -> f64 {
    gaps.iter()
        .zip(grad)
        .enumerate()
        .filter(|&(k, (&g, &d))| k != pivot && !(g <= 0.0 && d < 0.0))
        .map(|(_, (_, &d))| d * d)
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn gaps_from_rewards(r: &[f64]) -> Result<Vec<f64>> {
    let n = r.len();
    if r[0] != 1.0 || r[n - 1] != 0.0 {
        return Err(Error::InvalidInput(
            "initial point must have r_1 = 1 and r_n = 0".into(),
        ));
    }
    let gaps: Vec<f64> = r.windows(2).map(|w| w[0] - w[1]).collect();
    if gaps.iter().any(|&g| g < 0.0) {
        return Err(Error::InvalidInput("initial point must be nonincreasing".into()));
    }
    Ok(gaps)
}

/// Rewards from gaps: the lower half is summed up from r_n = 0, the upper half
/// down from r_1 = 1, so both ends keep their small distances.
pub(crate) fn rewards_from_gaps(gaps: &[f64]) -> Vec<f64> {
    let n = gaps.len() + 1;
    let mut r = vec![0.0; n];
    let half = n / 2;
    let mut acc = 0.0;
    for m in (half..n - 1).rev() {
        acc += gaps[m];
        r[m] = acc;
    }
    r[n - 1] = 0.0;
    let mut acc = 0.0;
    r[0] = 1.0;
    for m in 1..half {
        acc += gaps[m - 1];
        r[m] = 1.0 - acc;
    }
    r
}

pub(crate) fn maximize(u: &UtilitySpec, init: &[f64], settings: EngineSettings) -> Result<Outcome> {
    let n = init.len();
    let mut gaps = gaps_from_rewards(init)?;
    if n == 2 {
        let f = u.eval(1.0);
        return Ok(Outcome {
            rewards: vec![1.0, 0.0],
            objective: f,
            iterations: 0,
            residual: 0.0,
            converged: true,
            trace: vec![f],
        });
    }

    // eliminate the widest initial gap, preferring the middle on ties
    let mid = (n - 2) as f64 / 2.0;
    let pivot = (0..n - 1)
        .max_by(|&a, &b| {
            gaps[a]
                .total_cmp(&gaps[b])
                .then((b as f64 - mid).abs().total_cmp(&(a as f64 - mid).abs()))
        })
        .expect("n >= 3");
    let mut problem = Problem {
        u,
        n,
        pivot,
        singular: u.is_singular_at_zero(),
        min_gap: settings.min_gap,
    };
    problem.with_pivot(&mut gaps);

    let (mut f, mut scale) = problem.objective(&gaps);
    if f == f64::NEG_INFINITY {
        return Err(Error::BadInit);
    }
    if !f.is_finite() {
        return Err(Error::InvalidInput(format!("objective is {f} at the initial point")));
    }

    let mut trace = vec![f];
    let mut grad = problem.gradient(&gaps);
    let mut res = residual(&gaps, &grad, pivot);
    let mut iterations = 0;
    let mut repivoted = false;
    while res > settings.grad_tol && iterations < settings.max_iters {
        iterations += 1;
        let h = problem.curvature(&gaps);
        let noise = 64.0 * f64::EPSILON * (scale + 1.0);
        let step = newton_step(&problem, &gaps, &grad, &h, f, noise, res)
            .or_else(|| scaled_gradient_step(&problem, &gaps, &grad, &h, f, noise, res));
        let Some((g_new, f_new, s_new)) = step else {
            // a pivot that has to close can never move; hand the role to the
            // open gap with the largest flux, which stays open at the optimum
            let t = problem.flux(&gaps);
            let best = (0..n - 1)
                .filter(|&k| gaps[k] > 0.0)
                .max_by(|&a, &b| t[a].total_cmp(&t[b]))
                .expect("gaps sum to 1");
            if best == problem.pivot || repivoted {
                break;
            }
            repivoted = true;
            problem.pivot = best;
            grad = problem.gradient(&gaps);
            res = residual(&gaps, &grad, best);
            continue;
        };
        repivoted = false;
        gaps = g_new;
        f = f_new;
        scale = s_new;
        trace.push(f);
        grad = problem.gradient(&gaps);
        res = residual(&gaps, &grad, problem.pivot);
    }

    Ok(Outcome {
        rewards: rewards_from_gaps(&gaps),
        objective: f,
        iterations,
        residual: res,
        converged: res <= settings.grad_tol,
        trace,
    })
}

/// Reduced curvature over the free gaps after eliminating the pivot:
/// A_kl = H_kl − H_kp − H_pl + H_pp.
fn reduced(h: &DMatrix<f64>, free: &[usize], pivot: usize) -> DMatrix<f64> {
    let k = free.len();
    let hpp = h[(pivot, pivot)];
    DMatrix::from_fn(k, k, |a, b| {
        let (i, j) = (free[a], free[b]);
        h[(i, j)] - h[(i, pivot)] - h[(pivot, j)] + hpp
    })
}

fn solve_spd(a: &DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let k = a.nrows();
    if k == 0 {
        return Some(Vec::new());
    }
    // the diagonal spans many decades when some gaps are tiny, so the shift is
    // relative to each entry; an absolute floor would swamp the bulk curvature
    let max_diag = (0..k).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let floor = 1e-30 * max_diag.max(1.0);
    let b = DVector::from_column_slice(rhs);
    let mut delta = 1e-10;
    for _ in 0..6 {
        let mut m = a.clone();
        for i in 0..k {
            m[(i, i)] += delta * a[(i, i)].max(floor);
        }
        if let Some(ch) = m.cholesky() {
            let p = ch.solve(&b);
            if p.iter().all(|v| v.is_finite()) {
                return Some(p.iter().copied().collect());
            }
        }
        delta *= 100.0;
    }
    None
}

type Step = (Vec<f64>, f64, f64);

fn newton_step(
    problem: &Problem<'_>,
    gaps: &[f64],
    grad: &[f64],
    h: &DMatrix<f64>,
    f: f64,
    noise: f64,
    res: f64,
) -> Option<Step> {
    let m = gaps.len();
    let pivot = problem.pivot;
    let mut active: Vec<bool> = (0..m)
        .map(|k| k == pivot || (gaps[k] <= 0.0 && grad[k] < 0.0))
        .collect();
    let mut dir = vec![0.0; m];
    for _ in 0..if problem.singular { 1 } else { m.min(20) } {
        let free: Vec<usize> = (0..m).filter(|&k| !active[k]).collect();
        let a = reduced(h, &free, pivot);
        let rhs: Vec<f64> = free.iter().map(|&k| grad[k]).collect();
        let p = solve_spd(&a, &rhs)?;
        dir.iter_mut().for_each(|v| *v = 0.0);
        for (idx, &k) in free.iter().enumerate() {
            dir[k] = p[idx];
        }
        let mut grew = false;
        for &k in &free {
            if gaps[k] + dir[k] < 0.0 && grad[k] < 0.0 {
                active[k] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    for k in 0..m {
        if active[k] && k != pivot && grad[k] < 0.0 {
            dir[k] = -gaps[k];
        }
    }
    line_search(problem, gaps, grad, &dir, f, noise, res)
}

fn scaled_gradient_step(
    problem: &Problem<'_>,
    gaps: &[f64],
    grad: &[f64],
    h: &DMatrix<f64>,
    f: f64,
    noise: f64,
    res: f64,
) -> Option<Step> {
    let m = gaps.len();
    let max_diag = (0..m).map(|k| h[(k, k)]).fold(0.0, f64::max);
    let floor = 1e-30 * max_diag.max(1.0);
    let dir: Vec<f64> = (0..m)
        .map(|k| {
            if k == problem.pivot {
                0.0
            } else {
                grad[k] / h[(k, k)].max(floor)
            }
        })
        .collect();
    line_search(problem, gaps, grad, &dir, f, noise, res)
}

/// Armijo backtracking along P(g + α d), with the pivot re-derived from the
/// sum constraint. A negative pivot makes the trial infeasible. For singular U
/// the projection is onto g ≥ SHRINK · g_current.
fn line_search(
    problem: &Problem<'_>,
    gaps: &[f64],
    grad: &[f64],
    dir: &[f64],
    f: f64,
    noise: f64,
    res: f64,
) -> Option<Step> {
    let pivot = problem.pivot;
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let mut cand: Vec<f64> = gaps
            .iter()
            .zip(dir)
            .enumerate()
            .map(|(k, (&g, &d))| {
                if k == pivot {
                    g
                } else if problem.singular {
                    (g + alpha * d).max(SHRINK * g)
                } else {
                    (g + alpha * d).max(0.0)
                }
            })
            .collect();
        problem.with_pivot(&mut cand);
        let gain: f64 = (0..gaps.len())
            .filter(|&k| k != pivot)
            .map(|k| grad[k] * (cand[k] - gaps[k]))
            .sum();
        if gain <= 0.0 || cand[pivot] < 0.0 {
            alpha *= 0.5;
            continue;
        }
        let (f_new, s_new) = problem.objective(&cand);
        if f_new.is_finite() {
            if f_new >= f + ARMIJO * gain && f_new > f {
                return Some((cand, f_new, s_new));
            }
            if gain <= noise && f_new >= f - noise {
                let g_new = problem.gradient(&cand);
                if residual(&cand, &g_new, pivot) < res {
                    return Some((cand, f_new, s_new));
                }
            }
        }
        alpha *= 0.5;
    }
    None
}
