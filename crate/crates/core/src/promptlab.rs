//! Reward collapse across prompts, and the prompt-aware remedy.
//!
//! Each prompt's rewards are the interpolation optimum for its ranking, which
//! is the limit an overparameterized reward model reaches. With one utility
//! for every prompt the instances coincide, so every prompt gets the same
//! reward vector. Choosing the utility by prompt kind separates them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{solve_finite_n, SolverConfig};
use crate::utility::UtilitySpec;

pub const DEFAULT_RESPONSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    OpenEnded,
    Concrete,
}

impl PromptKind {
    pub fn target(self) -> Target {
        match self {
            Self::OpenEnded => Target::NearUniform,
            Self::Concrete => Target::Polarized,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OpenEnded => "open_ended",
            Self::Concrete => "concrete",
        }
    }
}

/// Reward shape a prompt kind calls for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    NearUniform,
    Polarized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub kind: PromptKind,
    pub n_responses: usize,
    pub target: Target,
}

impl PromptSpec {
    pub fn new(id: impl Into<String>, kind: PromptKind) -> Self {
        Self {
            id: id.into(),
            kind,
            n_responses: DEFAULT_RESPONSES,
            target: kind.target(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptAwarePolicy {
    pub open_ended_utility: UtilitySpec,
    pub concrete_utility: UtilitySpec,
}

impl Default for PromptAwarePolicy {
    /// −1/x (extended) for open-ended prompts, x for concrete ones.
    fn default() -> Self {
        Self {
            open_ended_utility: UtilitySpec::neg_power(1.0)
                .and_then(|u| u.with_appendix_a(crate::utility::DEFAULT_EPSILON))
                .expect("valid default"),
            concrete_utility: UtilitySpec::linear(),
        }
    }
}

impl PromptAwarePolicy {
    pub fn utility_for(&self, kind: PromptKind) -> &UtilitySpec {
        match kind {
            PromptKind::OpenEnded => &self.open_ended_utility,
            PromptKind::Concrete => &self.concrete_utility,
        }
    }
}

/// `count` prompts with alternating kinds, shuffled by `seed`.
pub fn generate_prompts(count: usize, seed: u64) -> Result<Vec<PromptSpec>> {
    if count < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 prompts, got {count}")));
    }
    let mut kinds: Vec<PromptKind> = (0..count)
        .map(|i| if i % 2 == 0 { PromptKind::OpenEnded } else { PromptKind::Concrete })
        .collect();
    kinds.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(kinds
        .into_iter()
        .enumerate()
        .map(|(i, k)| PromptSpec::new(format!("prompt-{i:03}"), k))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptOutcome {
    pub id: String,
    pub kind: PromptKind,
    /// Optimum under the shared utility.
    pub fixed: Vec<f64>,
    /// Optimum under the utility the policy picks for this kind.
    pub aware: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub n: usize,
    pub fixed_utility: UtilitySpec,
    pub policy: PromptAwarePolicy,
    pub prompts: Vec<PromptOutcome>,
    /// Two-sample KS between the kinds' pooled rewards, shared utility.
    pub collapse_gap_fixed: f64,
    /// Same, prompt-aware utilities.
    pub separation_gap_aware: f64,
}

/// sup_x |F_a(x) − F_b(x)| between two empirical laws.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("both samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(worst)
}

fn pooled_gap(outcomes: &[PromptOutcome], pick: impl Fn(&PromptOutcome) -> &[f64]) -> Result<f64> {
    let pool = |kind| -> Vec<f64> {
        outcomes
            .iter()
            .filter(|o| o.kind == kind)
            .flat_map(|o| pick(o).iter().copied())
            .collect()
    };
    let (open, concrete) = (pool(PromptKind::OpenEnded), pool(PromptKind::Concrete));
    if open.is_empty() || concrete.is_empty() {
        return Err(Error::InvalidInput(
            "the experiment needs at least one prompt of each kind".into(),
        ));
    }
    ks_two_sample(&open, &concrete)
}

/// Solves every prompt under `fixed_u` and under `policy`, in parallel.
pub fn collapse_experiment(
    prompts: &[PromptSpec],
    fixed_u: &UtilitySpec,
    policy: &PromptAwarePolicy,
    n: usize,
) -> Result<CollapseReport> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("n must be >= 4, got {n}")));
    }
    let cfg = SolverConfig::default();
    let outcomes = prompts
        .par_iter()
        .map(|p| {
            let tag = |e: Error| Error::Prompt {
                id: p.id.clone(),
                source: Box::new(e),
            };
            let fixed = solve_finite_n(fixed_u, n, &cfg).map_err(tag)?.rewards;
            let aware = solve_finite_n(policy.utility_for(p.kind), n, &cfg)
                .map_err(tag)?
                .rewards;
            Ok(PromptOutcome {
                id: p.id.clone(),
                kind: p.kind,
                fixed,
                aware,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let collapse_gap_fixed = pooled_gap(&outcomes, |o| &o.fixed)?;
    let separation_gap_aware = pooled_gap(&outcomes, |o| &o.aware)?;
    Ok(CollapseReport {
        n,
        fixed_utility: *fixed_u,
        policy: policy.clone(),
        prompts: outcomes,
        collapse_gap_fixed,
        separation_gap_aware,
    })
}
