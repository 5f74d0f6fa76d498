//! Projected Newton ascent for pair objectives on the box [0, 1]^n.
//!
//! The objective is `Σ_{i<j} a_ij U(r_i − r_j) + b_ij U(r_j − r_i)`. Its Hessian is
//! minus a weighted graph Laplacian, which makes a dense Newton system cheap at
//! the sizes we care about (n ≤ 500).
//!
//! Each coordinate may be stored mirrored (`x = 1 − r`). Rewards that converge to
//! 1 then keep full relative precision in their distance to the endpoint.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Pair {
    pub i: usize,
    pub j: usize,
    /// weight on U(r_i − r_j)
    pub fwd: f64,
    /// weight on U(r_j − r_i)
    pub bwd: f64,
}

pub(crate) struct PairProblem<'a> {
    pub u: &'a UtilitySpec,
    pub n: usize,
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub min_gap: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub rewards: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;
/// For U with U′(0⁺) = ∞ a trial may shrink no pair difference below this
/// fraction of its current size, nor flip its sign. Coinciding coordinates
/// are never optimal there, and once created they cannot be separated again.
const SHRINK: f64 = 1e-3;

struct State<'p, 'u> {
    problem: &'p PairProblem<'u>,
    flipped: Vec<bool>,
    singular: bool,
    min_gap: f64,
}

impl State<'_, '_> {
    /// r_i − r_j evaluated in storage coordinates without cancellation near 1.
    #[inline]
    fn diff(&self, x: &[f64], i: usize, j: usize) -> f64 {
        match (self.flipped[i], self.flipped[j]) {
            (false, false) => x[i] - x[j],
            (true, true) => x[j] - x[i],
            (true, false) => 1.0 - (x[i] + x[j]),
            (false, true) => (x[i] + x[j]) - 1.0,
        }
    }

    #[inline]
    fn sign(&self, i: usize) -> f64 {
        if self.flipped[i] {
            -1.0
        } else {
            1.0
        }
    }

    fn to_storage(&self, r: &[f64]) -> Vec<f64> {
        r.iter()
            .zip(&self.flipped)
            .map(|(&v, &f)| if f { 1.0 - v } else { v })
            .collect()
    }

    fn to_rewards(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.flipped)
            .map(|(&v, &f)| if f { 1.0 - v } else { v })
            .collect()
    }

    /// Objective value plus the sum of |terms|, used as a rounding-noise scale.
    fn objective(&self, x: &[f64]) -> (f64, f64) {
        let u = self.problem.u;
        let mut total = 0.0;
        let mut scale = 0.0;
        for p in &self.problem.pairs {
            let d = self.diff(x, p.i, p.j);
            if p.fwd != 0.0 {
                let v = p.fwd * u.eval(d);
                total += v;
                scale += v.abs();
            }
            if p.bwd != 0.0 {
                let v = p.bwd * u.eval(-d);
                total += v;
                scale += v.abs();
            }
        }
        (total, scale)
    }

    fn keeps_separation(&self, x: &[f64], cand: &[f64]) -> bool {
        self.problem.pairs.iter().all(|p| {
            let d0 = self.diff(x, p.i, p.j);
            if d0 == 0.0 {
                return true;
            }
            let d1 = self.diff(cand, p.i, p.j);
            d1 * d0 > 0.0 && d1.abs() >= SHRINK * d0.abs()
        })
    }

    /// Gradient and Laplacian (= −Hessian) in storage coordinates.
    fn derivatives(&self, x: &[f64], want_hessian: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let n = self.problem.n;
        let u = self.problem.u;
        let mut g = vec![0.0; n];
        let mut lap = want_hessian.then(|| DMatrix::<f64>::zeros(n, n));
        for p in &self.problem.pairs {
            let mut d = self.diff(x, p.i, p.j);
            if self.singular && d.abs() < self.min_gap {
                d = if d < 0.0 { -self.min_gap } else { self.min_gap };
            }
            let mut dg = 0.0;
            let mut c = 0.0;
            if p.fwd != 0.0 {
                dg += p.fwd * u.deriv(d);
                c -= p.fwd * u.second_deriv(d);
            }
            if p.bwd != 0.0 {
                dg -= p.bwd * u.deriv(-d);
                c -= p.bwd * u.second_deriv(-d);
            }
            g[p.i] += dg;
            g[p.j] -= dg;
            if let Some(l) = lap.as_mut() {
                // the convex part of a non-concave pair term is dropped so the
                // Newton matrix stays positive semidefinite
                let c = if c.is_finite() { c.max(0.0) } else { f64::MAX.sqrt() };
                let s = self.sign(p.i) * self.sign(p.j);
                l[(p.i, p.i)] += c;
                l[(p.j, p.j)] += c;
                l[(p.i, p.j)] -= s * c;
                l[(p.j, p.i)] -= s * c;
            }
        }
        for (i, gi) in g.iter_mut().enumerate() {
            *gi *= self.sign(i);
        }
        (g, lap)
    }
}

fn outward(x: f64, g: f64) -> bool {
    (x <= 0.0 && g < 0.0) || (x >= 1.0 && g > 0.0)
}

/// Norm of the gradient with components pinned by an active bound removed.
pub(crate) fn projected_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .filter(|(&xi, &gi)| !outward(xi, gi))
        .map(|(_, &gi)| gi * gi)
        .sum::<f64>()
        .sqrt()
}

fn project(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Solve (L_FF + δ D) p = g_F with D the clamped diagonal of L_FF.
fn newton_direction(lap: &DMatrix<f64>, g: &[f64], free: &[usize]) -> Option<Vec<f64>> {
    let k = free.len();
    if k == 0 {
        return Some(Vec::new());
    }
    // relative shift only: the diagonal can span many decades
    let max_diag = free.iter().map(|&i| lap[(i, i)]).fold(0.0, f64::max);
    let floor = 1e-30 * max_diag.max(1.0);
    let mut delta = 1e-10;
    for _ in 0..6 {
        let mut a = DMatrix::<f64>::zeros(k, k);
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                a[(r, c)] = lap[(i, j)];
            }
            a[(r, r)] += delta * lap[(i, i)].max(floor);
        }
        let rhs = DVector::from_iterator(k, free.iter().map(|&i| g[i]));
        if let Some(ch) = a.cholesky() {
            let p = ch.solve(&rhs);
            if p.iter().all(|v| v.is_finite()) {
                return Some(p.iter().copied().collect());
            }
        }
        delta *= 100.0;
    }
    None
}

pub(crate) fn maximize(
    problem: &PairProblem<'_>,
    init: &[f64],
    flipped: Vec<bool>,
    settings: EngineSettings,
) -> Result<Outcome> {
    let n = problem.n;
    if init.len() != n || flipped.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial point has length {}, expected {n}",
            init.len()
        )));
    }
    if init.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput("initial point must lie in [0, 1]".into()));
    }
    let state = State {
        problem,
        flipped,
        singular: problem.u.is_singular_at_zero(),
        min_gap: settings.min_gap,
    };

    let mut x = state.to_storage(init);
    let (mut f, mut scale) = state.objective(&x);
    if f == f64::NEG_INFINITY {
        return Err(Error::BadInit);
    }
    if !f.is_finite() {
        return Err(Error::InvalidInput(format!("objective is {f} at the initial point")));
    }

    let mut trace = vec![f];
    let mut iterations = 0;
    let (mut g, _) = state.derivatives(&x, false);
    let mut residual = projected_norm(&x, &g);

    while residual > settings.grad_tol && iterations < settings.max_iters {
        iterations += 1;
        let (_, lap) = state.derivatives(&x, true);
        let lap = lap.expect("hessian requested");
        let noise = 64.0 * f64::EPSILON * (scale + 1.0);

        let step = newton_step(&state, &x, &g, &lap, f, noise, residual)
            .or_else(|| gradient_step(&state, &x, &g, &lap, f, noise, residual));
        let Some((x_new, f_new, scale_new)) = step else {
            // no ascent direction survives the rounding noise
            break;
        };
        x = x_new;
        f = f_new;
        scale = scale_new;
        trace.push(f);
        g = state.derivatives(&x, false).0;
        residual = projected_norm(&x, &g);
    }

    Ok(Outcome {
        rewards: state.to_rewards(&x),
        objective: f,
        iterations,
        residual,
        converged: residual <= settings.grad_tol,
        trace,
    })
}

type Step = (Vec<f64>, f64, f64);

fn newton_step(
    state: &State<'_, '_>,
    x: &[f64],
    g: &[f64],
    lap: &DMatrix<f64>,
    f: f64,
    noise: f64,
    residual: f64,
) -> Option<Step> {
    let n = x.len();
    let mut active: Vec<bool> = (0..n).map(|i| outward(x[i], g[i])).collect();
    let mut p = vec![0.0; n];
    // grow the active set with coordinates the Newton step drives through a
    // bound they are already being pushed against
    for _ in 0..n.min(20) {
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let pf = newton_direction(lap, g, &free)?;
        p.iter_mut().for_each(|v| *v = 0.0);
        for (k, &i) in free.iter().enumerate() {
            p[i] = pf[k];
        }
        let mut grew = false;
        for &i in &free {
            let t = x[i] + p[i];
            if (t < 0.0 && g[i] < 0.0) || (t > 1.0 && g[i] > 0.0) {
                active[i] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    for i in 0..n {
        if active[i] {
            p[i] = if g[i] < 0.0 { -x[i] } else { 1.0 - x[i] };
        }
    }
    line_search(state, x, g, &p, f, noise, residual)
}

fn gradient_step(
    state: &State<'_, '_>,
    x: &[f64],
    g: &[f64],
    lap: &DMatrix<f64>,
    f: f64,
    noise: f64,
    residual: f64,
) -> Option<Step> {
    let max_diag = (0..x.len()).map(|i| lap[(i, i)]).fold(0.0, f64::max);
    let floor = 1e-30 * max_diag.max(1.0);
    let p: Vec<f64> = (0..x.len())
        .map(|i| g[i] / lap[(i, i)].max(floor))
        .collect();
    line_search(state, x, g, &p, f, noise, residual)
}

/// Armijo backtracking along the projection arc x(α) = P(x + α p).
///
/// When the predicted gain is below the rounding noise of the objective, a
/// step is also accepted if it does not lose more than that noise and it
/// reduces the projected gradient.
fn line_search(
    state: &State<'_, '_>,
    x: &[f64],
    g: &[f64],
    p: &[f64],
    f: f64,
    noise: f64,
    residual: f64,
) -> Option<Step> {
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let cand: Vec<f64> = x
            .iter()
            .zip(p)
            .map(|(&xi, &pi)| project(xi + alpha * pi))
            .collect();
        let gain: f64 = cand
            .iter()
            .zip(x)
            .zip(g)
            .map(|((&c, &xi), &gi)| gi * (c - xi))
            .sum();
        if gain <= 0.0 || (state.singular && !state.keeps_separation(x, &cand)) {
            alpha *= 0.5;
            continue;
        }
        let (f_new, scale_new) = state.objective(&cand);
        if f_new.is_finite() {
            if f_new >= f + ARMIJO * gain && f_new > f {
                return Some((cand, f_new, scale_new));
            }
            if gain <= noise && f_new >= f - noise {
                let (g_new, _) = state.derivatives(&cand, false);
                if projected_norm(&cand, &g_new) < residual {
                    return Some((cand, f_new, scale_new));
                }
            }
        }
        alpha *= 0.5;
    }
    None
}
