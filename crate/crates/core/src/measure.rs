//! Maximize E U(|X − X′|) over probability measures on an equispaced grid.
//!
//! The objective is the quadratic form wᵀKw with K_ij = U(|x_i − x_j|). On an
//! equispaced grid K is Toeplitz, so a single kernel vector k[d] = U(d·h) is
//! stored. Ascent is pairwise Frank–Wolfe: mass moves from the worst support
//! point to the best vertex with an exact line search, since the objective is
//! quadratic along every segment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SolverConfig;
use crate::utility::UtilitySpec;

pub const MAX_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if grid.len() != weights.len() || grid.is_empty() {
            return Err(Error::InvalidInput(
                "grid and weights must be nonempty and of equal length".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        if grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput("grid points must lie in [0, 1]".into()));
        }
        Ok(Self { grid, weights })
    }

    /// Equispaced grid on [0, 1] with uniform weights.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {m}")));
        }
        Ok(Self {
            grid: grid(m),
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// max_i |w_i − w_{m−1−i}|
    pub fn asymmetry(&self) -> f64 {
        let m = self.weights.len();
        (0..m)
            .map(|i| (self.weights[i] - self.weights[m - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

fn grid(m: usize) -> Vec<f64> {
    let last = (m - 1) as f64;
    (0..m).map(|i| i as f64 / last).collect()
}

/// Σ_ij w_i w_j U(|x_i − x_j|). The diagonal carries U(0), so a singular U
/// gives −∞ for any measure with positive mass.
pub fn expected_utility(mu: &GridMeasure, u: &UtilitySpec) -> f64 {
    let (x, w) = (&mu.grid, &mu.weights);
    let mut total = 0.0;
    for i in 0..x.len() {
        if w[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..x.len() {
            if w[j] != 0.0 {
                row += w[j] * u.eval((x[i] - x[j]).abs());
            }
        }
        total += w[i] * row;
    }
    total
}

/// Expected utility of the empirical measure (1/n) Σ δ_{r_i}, self-pairs included.
pub fn empirical_expected_utility(rewards: &[f64], u: &UtilitySpec) -> f64 {
    let n = rewards.len() as f64;
    let mut total = 0.0;
    for &a in rewards {
        for &b in rewards {
            total += u.eval((a - b).abs());
        }
    }
    total / (n * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptimum {
    pub measure: GridMeasure,
    pub objective: f64,
    /// max_i 2(Kw)_i − 2wᵀKw after symmetrization.
    pub fw_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The form is concave on the simplex (centered K negative semidefinite),
    /// so a vanishing gap certifies a global maximum.
    pub certified: bool,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

struct Toeplitz {
    k: Vec<f64>,
}

impl Toeplitz {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.k[i.abs_diff(j)]
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        let m = w.len();
        (0..m)
            .map(|i| (0..m).map(|j| self.at(i, j) * w[j]).sum())
            .collect()
    }

    /// Largest eigenvalue of P K P on the sum-zero subspace, relative to max |K|.
    fn centered_top_eigenvalue(&self, m: usize) -> f64 {
        let k = DMatrix::from_fn(m, m, |i, j| self.at(i, j));
        let mean_rows: Vec<f64> = (0..m).map(|i| k.row(i).sum() / m as f64).collect();
        let mean_all = mean_rows.iter().sum::<f64>() / m as f64;
        let centered = DMatrix::from_fn(m, m, |i, j| k[(i, j)] - mean_rows[i] - mean_rows[j] + mean_all);
        let scale = self.k.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let top = centered
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        top / scale
    }
}

fn validate(u: &UtilitySpec, m: usize, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if m < 3 || m.is_multiple_of(2) || m > MAX_GRID {
        return Err(Error::InvalidInput(format!(
            "grid size must be odd and in [3, {MAX_GRID}], got {m}"
        )));
    }
    if !u.eval(0.0).is_finite() {
        return Err(Error::InvalidUtility(format!(
            "{u} is singular at 0; grid measures have self-pairs, enable the extension"
        )));
    }
    Ok(())
}

fn fw_gap(kw: &[f64], w: &[f64]) -> f64 {
    let quad: f64 = kw.iter().zip(w).map(|(a, b)| a * b).sum();
    let best = kw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    2.0 * (best - quad)
}

/// Pairwise Frank–Wolfe from the uniform measure, then w ← (w + reverse(w))/2.
pub fn optimize_measure(u: &UtilitySpec, m: usize, cfg: &SolverConfig) -> Result<MeasureOptimum> {
    validate(u, m, cfg)?;
    let h = 1.0 / (m - 1) as f64;
    let kernel = Toeplitz {
        k: (0..m).map(|d| u.eval(d as f64 * h)).collect(),
    };

    let mut w = vec![1.0 / m as f64; m];
    let mut kw = kernel.apply(&w);
    let objective = |kw: &[f64], w: &[f64]| kw.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let mut trace = vec![objective(&kw, &w)];
    let mut iterations = 0;
    // recompute Kw from scratch now and then to shed accumulated rounding
    const REFRESH: usize = 1000;

    while iterations < cfg.max_iters {
        let s = (0..m).max_by(|&a, &b| kw[a].total_cmp(&kw[b])).expect("m >= 3");
        let a = (0..m)
            .filter(|&i| w[i] > 0.0)
            .min_by(|&a, &b| kw[a].total_cmp(&kw[b]))
            .expect("support is nonempty");
        if fw_gap(&kw, &w) <= cfg.grad_tol || s == a {
            break;
        }
        iterations += 1;
        // along d = e_s − e_a: f(w + t d) = f + 2t (Kw_s − Kw_a) + t² dᵀKd
        let slope = kw[s] - kw[a];
        let curv = kernel.at(s, s) + kernel.at(a, a) - 2.0 * kernel.at(s, a);
        let cap = w[a];
        let t = if curv < 0.0 { (-slope / curv).min(cap) } else { cap };
        if !(t > 0.0) {
            break;
        }
        if t == cap {
            w[s] += w[a];
            w[a] = 0.0;
        } else {
            w[s] += t;
            w[a] -= t;
        }
        if iterations % REFRESH == 0 {
            kw = kernel.apply(&w);
        } else {
            for (i, v) in kw.iter_mut().enumerate() {
                *v += t * (kernel.at(i, s) - kernel.at(i, a));
            }
        }
        trace.push(objective(&kw, &w));
    }

    let sym: Vec<f64> = (0..m).map(|i| 0.5 * (w[i] + w[m - 1 - i])).collect();
    let total: f64 = sym.iter().sum();
    let w: Vec<f64> = sym.iter().map(|v| v / total).collect();
    let kw = kernel.apply(&w);
    let gap = fw_gap(&kw, &w);
    let certified = kernel.centered_top_eigenvalue(m) <= 1e-10;

    Ok(MeasureOptimum {
        objective: objective(&kw, &w),
        measure: GridMeasure { grid: grid(m), weights: w },
        fw_gap: gap,
        iterations,
        converged: gap <= cfg.grad_tol,
        certified,
        trace,
    })
}
