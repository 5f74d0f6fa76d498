//! Flatness of c ↦ E|X − c|^γ under a Beta law.
//!
//! With x = sin²θ the Beta(a, b) expectation becomes
//!
//! ```text
//! F(c) = 2/B(a,b) ∫_0^{π/2} |sin²θ − c|^γ sin^{2a−1}θ cos^{2b−1}θ dθ
//! ```
//!
//! The integrand is still weakly singular at the ends when a or b is below ½,
//! and it has a cusp at sin²θ = c. We split at the cusp, write each piece from
//! its singular end (the right piece by reflecting θ ↦ π/2 − θ, c ↦ 1 − c) and
//! apply a sigmoidal grading before Gauss–Legendre. The error is estimated by
//! repeating the computation with half the nodes.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use super::beta::BetaParams;
use crate::error::{Error, Result};

/// Error estimates above this make [`flatness_deviation`] fail.
pub const QUAD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub gamma: f64,
    pub law: BetaParams,
    pub c_grid_size: usize,
    pub quad_points: usize,
    /// F(½), the value every other F(c) is compared with.
    pub reference: f64,
    /// max_c |F(c) − F(½)|
    pub max_deviation: f64,
    /// max_c of the difference between the full and the half-size rule.
    pub error_estimate: f64,
    /// (c, F(c)) on the grid.
    pub profile: Vec<(f64, f64)>,
}

struct Rule {
    nodes: Vec<(f64, f64)>,
}

impl Rule {
    /// Gauss–Legendre on [0, 1] composed with t ↦ t^p / (t^p + (1 − t)^p).
    fn graded(points: usize, p: f64) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(points).expect("points >= 1"));
        let nodes = gl
            .into_iter()
            .map(|(x, w)| {
                let t = 0.5 * (x + 1.0);
                let (tp, sp) = (t.powf(p), (1.0 - t).powf(p));
                let den = tp + sp;
                let phi = tp / den;
                let dphi = p * (t * (1.0 - t)).powf(p - 1.0) / (den * den);
                (phi, 0.5 * w * dphi)
            })
            .collect();
        Self { nodes }
    }

    /// ∫_0^{s_max} |sin²s − c|^γ sin^{ea}s cos^{eb}s ds, singular end at s = 0.
    fn piece(&self, s_max: f64, c: f64, gamma: f64, ea: f64, eb: f64) -> f64 {
        if s_max <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for &(phi, w) in &self.nodes {
            let s = s_max * phi;
            if s <= 0.0 || w == 0.0 {
                continue;
            }
            let (sin, cos) = s.sin_cos();
            let v = (sin * sin - c).abs().powf(gamma) * sin.powf(ea) * cos.powf(eb);
            if v.is_finite() {
                total += v * w;
            }
        }
        total * s_max
    }
}

fn validate(gamma: f64, c_grid_size: usize, quad_points: usize) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if c_grid_size < 2 {
        return Err(Error::InvalidInput("c grid needs at least 2 points".into()));
    }
    if quad_points < 4 {
        return Err(Error::InvalidInput("quadrature needs at least 4 points".into()));
    }
    Ok(())
}

fn expectations(law: BetaParams, gamma: f64, cs: &[f64], per_piece: usize) -> Vec<f64> {
    let (a, b) = (law.alpha, law.beta);
    let weakest = (2.0 * a).min(2.0 * b).min(1.0);
    let p = (3.0 / weakest).ceil().clamp(2.0, 40.0);
    let rule = Rule::graded(per_piece, p);
    let scale = 2.0 * (-law.ln_beta()).exp();
    let (ea, eb) = (2.0 * a - 1.0, 2.0 * b - 1.0);
    cs.iter()
        .map(|&c| {
            let theta_c = c.sqrt().asin();
            let left = rule.piece(theta_c, c, gamma, ea, eb);
            let right = rule.piece((1.0 - c).sqrt().asin(), 1.0 - c, gamma, eb, ea);
            scale * (left + right)
        })
        .collect()
}

/// E|X − c|^γ for X ~ `law`, on `c_grid_size` equispaced c in [0, 1].
///
/// `quad_points` is the total node count across both pieces. Never fails on
/// accuracy; the estimate is reported instead.
pub fn flatness_profile(
    law: BetaParams,
    gamma: f64,
    c_grid_size: usize,
    quad_points: usize,
) -> Result<FlatnessReport> {
    validate(gamma, c_grid_size, quad_points)?;
    let last = (c_grid_size - 1) as f64;
    let mut cs: Vec<f64> = (0..c_grid_size).map(|k| k as f64 / last).collect();
    cs.push(0.5);

    let fine = expectations(law, gamma, &cs, quad_points / 2);
    let coarse = expectations(law, gamma, &cs, quad_points / 4);
    let reference = *fine.last().expect("c = ½ appended");
    let error_estimate = fine
        .iter()
        .zip(&coarse)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let profile: Vec<(f64, f64)> = cs[..c_grid_size]
        .iter()
        .copied()
        .zip(fine[..c_grid_size].iter().copied())
        .collect();
    let max_deviation = profile
        .iter()
        .map(|&(_, f)| (f - reference).abs())
        .fold(0.0, f64::max);
    Ok(FlatnessReport {
        gamma,
        law,
        c_grid_size,
        quad_points,
        reference,
        max_deviation,
        error_estimate,
        profile,
    })
}

/// Flatness of E|X − c|^γ under Beta((1−γ)/2, (1−γ)/2), the law that makes it
/// exactly constant. Fails with [`Error::Quadrature`] when the error estimate
/// exceeds [`QUAD_TOL`].
pub fn flatness_deviation(gamma: f64, c_grid_size: usize, quad_points: usize) -> Result<FlatnessReport> {
    validate(gamma, c_grid_size, quad_points)?;
    let law = BetaParams::symmetric(0.5 - gamma / 2.0)?;
    let report = flatness_profile(law, gamma, c_grid_size, quad_points)?;
    if !(report.error_estimate <= QUAD_TOL) {
        return Err(Error::Quadrature {
            estimate: report.error_estimate,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// The constant value: F(0) = E X^γ = B((1+γ)/2, (1−γ)/2) / B(a, a).
    fn flat_value(gamma: f64) -> f64 {
        let a = (1.0 - gamma) / 2.0;
        PI / (PI * gamma / 2.0).cos() * (-super::super::beta::ln_beta(a, a)).exp()
    }

    #[test]
    fn matches_the_closed_form_constant() {
        for &g in &[0.2, 0.5, 0.8] {
            let r = flatness_deviation(g, 21, 2000).unwrap();
            let want = flat_value(g);
            for &(c, f) in &r.profile {
                assert!((f - want).abs() < 1e-9, "gamma {g}, c {c}: {f} vs {want}");
            }
            assert!(r.max_deviation < 1e-9);
        }
    }

    #[test]
    fn uniform_law_matches_its_closed_form() {
        let g = 0.5;
        let law = BetaParams::symmetric(1.0).unwrap();
        let r = flatness_profile(law, g, 11, 400).unwrap();
        for &(c, f) in &r.profile {
            let want = (c.powf(g + 1.0) + (1.0 - c).powf(g + 1.0)) / (g + 1.0);
            assert!((f - want).abs() < 1e-10, "c {c}: {f} vs {want}");
        }
        assert!(r.max_deviation > 0.05);
    }

    #[test]
    fn asymmetric_law_at_the_ends() {
        // E X^γ under Beta(a, b) is B(a + γ, b) / B(a, b)
        let (a, b, g) = (0.3, 2.5, 0.4);
        let law = BetaParams::new(a, b).unwrap();
        let r = flatness_profile(law, g, 2, 1000).unwrap();
        let ln_b = super::super::beta::ln_beta;
        let at0 = (ln_b(a + g, b) - ln_b(a, b)).exp();
        let at1 = (ln_b(a, b + g) - ln_b(a, b)).exp();
        assert!((r.profile[0].1 - at0).abs() < 1e-9);
        assert!((r.profile[1].1 - at1).abs() < 1e-9);
    }

    #[test]
    fn refinement_reduces_the_error() {
        let want = flat_value(0.8);
        let mut last = f64::INFINITY;
        for &q in &[16, 64, 256, 1024] {
            let law = BetaParams::symmetric(0.1).unwrap();
            let r = flatness_profile(law, 0.8, 11, q).unwrap();
            let err = r.profile.iter().map(|&(_, f)| (f - want).abs()).fold(0.0, f64::max);
            assert!(err < last, "{q}: {err} >= {last}");
            last = err;
        }
    }

    #[test]
    fn too_few_points_is_reported() {
        match flatness_deviation(0.8, 11, 4) {
            Err(Error::Quadrature { estimate }) => assert!(estimate > QUAD_TOL),
            other => panic!("expected a quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(flatness_deviation(0.0, 11, 100).is_err());
        assert!(flatness_deviation(1.0, 11, 100).is_err());
        assert!(flatness_deviation(0.5, 1, 100).is_err());
        assert!(flatness_deviation(0.5, 11, 2).is_err());
    }
}
