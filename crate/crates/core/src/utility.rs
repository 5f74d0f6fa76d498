//! Utility functions applied to reward differences.
//!
//! Five families are supported:
//!
//! | family       | U(x)                 | parameters |
//! |--------------|----------------------|------------|
//! | `power`      | x^γ                  | 0 < γ < 1  |
//! | `negpow`     | −x^(−γ)              | 0 ≤ γ ≤ 1 (γ = 0 is `log`) |
//! | `log`        | log x                |            |
//! | `logsigmoid` | log sigmoid(x/σ)     | σ > 0      |
//! | `linear`     | x                    |            |
//!
//! `negpow` and `log` are −∞ at x ≤ 0. The optional extension (`ext=appendixA`)
//! shifts the argument by ε on the positive side and continues linearly with unit
//! slope on x ≤ 0, which makes them finite and continuous on all of [−1, 1].
//!
//! `power` is only defined on [0, 1] as a utility; for negative arguments `eval`
//! returns the odd reflection −|x|^γ so that objectives containing both orderings
//! of a pair (the pairwise-comparison objective) stay finite.
//!
//! −∞ is returned as [`f64::NEG_INFINITY`] and only ever produced on purpose; the
//! families never overflow on [−1, 1] at arguments above `f64::MIN_POSITIVE`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Power,
    NegPower,
    Log,
    LogSigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Extension {
    None,
    AppendixA,
}

/// An immutable, validated utility function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UtilitySpec {
    family: Family,
    gamma: f64,
    sigma: f64,
    epsilon: f64,
    extension: Extension,
}

impl UtilitySpec {
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidUtility(format!(
                "power requires 0 < gamma < 1, got {gamma}"
            )));
        }
        Ok(Self::raw(Family::Power, gamma, 1.0))
    }

    /// `−x^(−γ)` for `0 < γ ≤ 1`. By convention `γ = 0` is the `log` family.
    pub fn neg_power(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidUtility(format!(
                "negpow requires 0 <= gamma <= 1, got {gamma}"
            )));
        }
        if gamma == 0.0 {
            return Ok(Self::log());
        }
        Ok(Self::raw(Family::NegPower, gamma, 1.0))
    }

    pub fn log() -> Self {
        Self::raw(Family::Log, 0.0, 1.0)
    }

    pub fn log_sigmoid(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidUtility(format!(
                "logsigmoid requires sigma > 0, got {sigma}"
            )));
        }
        Ok(Self::raw(Family::LogSigmoid, 0.0, sigma))
    }

    pub fn linear() -> Self {
        Self::raw(Family::Linear, 0.0, 1.0)
    }

    /// Switch on the continuous extension to x ≤ 0 with shift `epsilon`.
    /// Only `log` and `negpow` have one.
    pub fn with_appendix_a(mut self, epsilon: f64) -> Result<Self> {
        if !matches!(self.family, Family::Log | Family::NegPower) {
            return Err(Error::InvalidUtility(format!(
                "the appendixA extension is defined for log and negpow only, not {}",
                self.family_name()
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidUtility(format!(
                "extension shift must be > 0, got {epsilon}"
            )));
        }
        self.extension = Extension::AppendixA;
        self.epsilon = epsilon;
        Ok(self)
    }

    fn raw(family: Family, gamma: f64, sigma: f64) -> Self {
        Self {
            family,
            gamma,
            sigma,
            epsilon: DEFAULT_EPSILON,
            extension: Extension::None,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn is_extended(&self) -> bool {
        self.extension == Extension::AppendixA
    }

    fn family_name(&self) -> &'static str {
        match self.family {
            Family::Power => "power",
            Family::NegPower => "negpow",
            Family::Log => "log",
            Family::LogSigmoid => "logsigmoid",
            Family::Linear => "linear",
        }
    }

    /// Shift applied on the positive branch (zero without the extension).
    fn shift(&self) -> f64 {
        if self.is_extended() {
            self.epsilon
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.family {
            Family::Power => {
                if x >= 0.0 {
                    x.powf(self.gamma)
                } else {
                    -(-x).powf(self.gamma)
                }
            }
            Family::NegPower => {
                if x > 0.0 {
                    -(x + self.shift()).powf(-self.gamma)
                } else if self.is_extended() {
                    x - self.epsilon.powf(-self.gamma)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Log => {
                if x > 0.0 {
                    (x + self.shift()).ln()
                } else if self.is_extended() {
                    x + self.epsilon.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::LogSigmoid => log_sigmoid(x / self.sigma),
            Family::Linear => x,
        }
    }

    /// U′(x). Returns `+∞` where the derivative blows up (power at 0, the
    /// unextended singular families at x ≤ 0). On the extended families the
    /// x ≤ 0 branch owns the point x = 0.
    pub fn deriv(&self, x: f64) -> f64 {
        let g = self.gamma;
        match self.family {
            Family::Power => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    g * x.abs().powf(g - 1.0)
                }
            }
            Family::NegPower => {
                if x > 0.0 {
                    g * (x + self.shift()).powf(-g - 1.0)
                } else if self.is_extended() {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            Family::Log => {
                if x > 0.0 {
                    1.0 / (x + self.shift())
                } else if self.is_extended() {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            Family::LogSigmoid => sigmoid(-x / self.sigma) / self.sigma,
            Family::Linear => 1.0,
        }
    }

    /// U″(x), with the same branch conventions as [`deriv`](Self::deriv).
    pub fn second_deriv(&self, x: f64) -> f64 {
        let g = self.gamma;
        match self.family {
            Family::Power => {
                if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let v = g * (g - 1.0) * x.abs().powf(g - 2.0);
                    if x > 0.0 {
                        v
                    } else {
                        -v
                    }
                }
            }
            Family::NegPower => {
                if x > 0.0 {
                    -g * (g + 1.0) * (x + self.shift()).powf(-g - 2.0)
                } else if self.is_extended() {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Log => {
                if x > 0.0 {
                    let s = x + self.shift();
                    -1.0 / (s * s)
                } else if self.is_extended() {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::LogSigmoid => {
                let z = x / self.sigma;
                -sigmoid(z) * sigmoid(-z) / (self.sigma * self.sigma)
            }
            Family::Linear => 0.0,
        }
    }

    /// U′(0⁺), the derivative seen by a pair that starts to separate.
    pub fn deriv_at_zero_right(&self) -> f64 {
        let g = self.gamma;
        match self.family {
            Family::Power => f64::INFINITY,
            Family::NegPower if self.is_extended() => g * self.epsilon.powf(-g - 1.0),
            Family::Log if self.is_extended() => 1.0 / self.epsilon,
            Family::NegPower | Family::Log => f64::INFINITY,
            Family::LogSigmoid => 0.5 / self.sigma,
            Family::Linear => 1.0,
        }
    }

    /// κ = U′(0)/U′(1), the ratio governing the endpoint mass bound 1/(κ+1).
    pub fn kappa(&self) -> Result<f64> {
        let d0 = self.deriv_at_zero_right();
        let d1 = self.deriv(1.0);
        if !d0.is_finite() {
            return Err(Error::Inapplicable(format!(
                "mass bound inapplicable: U'(0) is infinite for {self}"
            )));
        }
        if d1 <= 0.0 {
            return Err(Error::Inapplicable(format!(
                "mass bound inapplicable: U'(1) = {d1} for {self}"
            )));
        }
        Ok(d0 / d1)
    }

    /// True when U(0) = −∞ or U′(0⁺) = ∞. Solvers must keep pairs apart.
    pub fn is_singular_at_zero(&self) -> bool {
        !self.deriv_at_zero_right().is_finite()
    }

    /// Strict concavity on [0, 1], the region the ordered problem lives in.
    pub fn is_strictly_concave(&self) -> bool {
        self.family != Family::Linear
    }

    /// Whether U is finite at every x in [−1, 1].
    pub fn is_finite_on_interval(&self) -> bool {
        match self.family {
            Family::NegPower | Family::Log => self.is_extended(),
            _ => true,
        }
    }

    /// Whether U is concave on the whole of [−1, 1] rather than only [0, 1].
    /// The extensions have a convex kink at 0 (slope 1 on the left, 1/ε or
    /// γ/ε^(γ+1) on the right) and the odd power reflection is convex on x < 0.
    pub fn is_concave_on_interval(&self) -> bool {
        matches!(self.family, Family::LogSigmoid | Family::Linear)
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Power | Family::NegPower => {
                write!(f, "{}:gamma={}", self.family_name(), self.gamma)?
            }
            Family::Log | Family::Linear => write!(f, "{}", self.family_name())?,
            Family::LogSigmoid => write!(f, "logsigmoid:sigma={}", self.sigma)?,
        }
        if self.is_extended() {
            let sep = if self.family == Family::Log { ':' } else { ',' };
            write!(f, "{sep}eps={},ext=appendixA", self.epsilon)?;
        }
        Ok(())
    }
}

impl FromStr for UtilitySpec {
    type Err = Error;

    /// Parses `family[:key=value,...]`, e.g. `power:gamma=0.8`,
    /// `negpow:gamma=1,eps=0.1,ext=appendixA`, `logsigmoid:sigma=0.25`,
    /// `log:ext=appendixA`, `linear`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), p.trim()),
            None => (s, ""),
        };

        let mut gamma = None;
        let mut sigma = None;
        let mut eps = None;
        let mut ext = Extension::None;
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidUtility(format!("expected key=value, got `{kv}`")))?;
            let num = || {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidUtility(format!("bad number for {k}: `{v}`")))
            };
            match k.trim() {
                "gamma" => gamma = Some(num()?),
                "sigma" => sigma = Some(num()?),
                "eps" | "epsilon" => eps = Some(num()?),
                "ext" => {
                    ext = match v.trim().to_ascii_lowercase().as_str() {
                        "appendixa" => Extension::AppendixA,
                        "none" => Extension::None,
                        other => {
                            return Err(Error::InvalidUtility(format!(
                                "unknown extension `{other}`"
                            )))
                        }
                    }
                }
                other => {
                    return Err(Error::InvalidUtility(format!("unknown parameter `{other}`")))
                }
            }
        }

        let need = |p: Option<f64>, what: &str| {
            p.ok_or_else(|| Error::InvalidUtility(format!("{name} requires {what}=<value>")))
        };
        let forbid = |p: Option<f64>, what: &str| match p {
            Some(_) => Err(Error::InvalidUtility(format!("{name} takes no {what}"))),
            None => Ok(()),
        };

        let base = match name.to_ascii_lowercase().as_str() {
            "power" => {
                forbid(sigma, "sigma")?;
                Self::power(need(gamma, "gamma")?)?
            }
            "negpow" => {
                forbid(sigma, "sigma")?;
                Self::neg_power(need(gamma, "gamma")?)?
            }
            "log" => {
                forbid(gamma, "gamma")?;
                forbid(sigma, "sigma")?;
                Self::log()
            }
            "logsigmoid" => {
                forbid(gamma, "gamma")?;
                Self::log_sigmoid(need(sigma, "sigma")?)?
            }
            "linear" => {
                forbid(gamma, "gamma")?;
                forbid(sigma, "sigma")?;
                Self::linear()
            }
            other => return Err(Error::InvalidUtility(format!("unknown family `{other}`"))),
        };

        match ext {
            Extension::AppendixA => base.with_appendix_a(eps.unwrap_or(DEFAULT_EPSILON)),
            Extension::None => {
                if eps.is_some() {
                    return Err(Error::InvalidUtility(
                        "eps is only meaningful with ext=appendixA".into(),
                    ));
                }
                Ok(base)
            }
        }
    }
}

impl TryFrom<String> for UtilitySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<UtilitySpec> for String {
    fn from(u: UtilitySpec) -> String {
        u.to_string()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log sigmoid(z) = −softplus(−z), computed without overflow.
pub fn log_sigmoid(z: f64) -> f64 {
    -((-z).max(0.0) + (-z.abs()).exp().ln_1p())
}
