//! Limiting reward laws, Beta special functions and goodness-of-fit metrics.

pub mod beta;
pub mod flatness;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::{Family, UtilitySpec};

pub use beta::{beta_cdf, beta_quantile, BetaParams};
pub use flatness::{flatness_deviation, flatness_profile, FlatnessReport};

/// Large-n law of the optimal rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitDistribution {
    Beta(BetaParams),
    /// Only a lower bound is known: μ({0}) = μ({1}) ≥ 1/(κ + 1).
    EndpointMassBound { kappa: f64, mass_lower_bound: f64 },
}

impl LimitDistribution {
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            Self::Beta(p) => Ok(p.cdf(x)),
            Self::EndpointMassBound { .. } => Err(Error::Inapplicable(
                "an endpoint-mass bound has no cdf; use endpoint_mass_fraction".into(),
            )),
        }
    }
}

pub fn limit_distribution(u: &UtilitySpec) -> Result<LimitDistribution> {
    if u.is_extended() {
        return Err(Error::Inapplicable(
            "limit unknown: the extension alters U near 0".into(),
        ));
    }
    let g = u.gamma();
    Ok(match u.family() {
        Family::Power => LimitDistribution::Beta(BetaParams::symmetric(0.5 - g / 2.0)?),
        Family::NegPower => LimitDistribution::Beta(BetaParams::symmetric(0.5 + g / 2.0)?),
        Family::Log => LimitDistribution::Beta(BetaParams::symmetric(0.5)?),
        Family::LogSigmoid | Family::Linear => {
            let kappa = u.kappa()?;
            LimitDistribution::EndpointMassBound {
                kappa,
                mass_lower_bound: 1.0 / (kappa + 1.0),
            }
        }
    })
}

fn beta_law(law: &LimitDistribution) -> Result<BetaParams> {
    match law {
        LimitDistribution::Beta(p) => Ok(*p),
        LimitDistribution::EndpointMassBound { .. } => Err(Error::Inapplicable(
            "KS distance needs a Beta law; use endpoint_mass_fraction for endpoint-mass bounds"
                .into(),
        )),
    }
}

/// sup_x |F_n(x) − F(x)| for the empirical law of `samples`, evaluated on
/// both sides of every jump.
pub fn ks_distance(samples: &[f64], law: &LimitDistribution) -> Result<f64> {
    let p = beta_law(law)?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = p.cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// KS distance for a measure on an equispaced grid, read as a histogram.
///
/// The weight at grid point x_i stands for the cell around it, so the
/// cumulative weight through x_i is compared with F at the boundary between
/// x_i and x_{i+1}. Comparing atoms directly would charge the whole endpoint
/// cell to the endpoint itself.
pub fn ks_distance_cells(grid: &[f64], weights: &[f64], law: &LimitDistribution) -> Result<f64> {
    let p = beta_law(law)?;
    if grid.len() != weights.len() || grid.len() < 2 {
        return Err(Error::InvalidInput(
            "grid and weights must have the same length >= 2".into(),
        ));
    }
    let mut acc = 0.0;
    let mut worst = 0.0_f64;
    for i in 0..grid.len() - 1 {
        acc += weights[i];
        let boundary = 0.5 * (grid[i] + grid[i + 1]);
        worst = worst.max((acc - p.cdf(boundary)).abs());
    }
    Ok(worst)
}

/// Fractions of entries within `tol` of 0 and of 1.
pub fn endpoint_mass_fraction(rewards: &[f64], tol: f64) -> Result<(f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }
    if rewards.is_empty() {
        return Err(Error::InvalidInput("no rewards".into()));
    }
    let n = rewards.len() as f64;
    let low = rewards.iter().filter(|&&r| r.abs() <= tol).count() as f64;
    let high = rewards.iter().filter(|&&r| (1.0 - r).abs() <= tol).count() as f64;
    Ok((low / n, high / n))
}
