//! Actor, critics, observation layouts and checkpoints.

pub mod checkpoint;
pub mod mlp;
pub mod obs;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, ApexError, Result};
pub use mlp::{Adam, ForwardCache, Mlp, MlpGrads};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Network sizes and initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Multiplier on the actor's initial output-layer weights.
    pub actor_output_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            init_log_std: -1.0,
            actor_output_gain: 0.01,
        }
    }
}

pub(crate) fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

/// Diagonal Gaussian actor with state-independent log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        let mean_net = Mlp::new(&sizes(obs_dim, &cfg.actor_hidden, act_dim), cfg.actor_output_gain, rng)?;
        Ok(Self {
            mean_net,
            log_std: vec![cfg.init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); act_dim],
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    pub fn clamp_log_std(&mut self) {
        for s in &mut self.log_std {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mean = self.mean_net.forward_one(obs)?;
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(ApexError::Numeric("actor produced a non-finite mean".into()));
        }
        Ok(mean)
    }

    /// Samples an action and returns it with its log density.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s.exp() * z
            })
            .collect();
        let lp = self.log_prob(&mean, &action)?;
        Ok((action, lp))
    }

    /// Diagonal-Gaussian log density of `action` around `mean`.
    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> Result<f64> {
        check_len("log_prob::mean", self.log_std.len(), mean.len())?;
        check_len("log_prob::action", self.log_std.len(), action.len())?;
        Ok(gaussian_log_prob(mean, &self.log_std, action))
    }

    /// Differential entropy, constant in the observation.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 + HALF_LOG_TWO_PI).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.mean_net.is_finite() && self.log_std.iter().all(|s| s.is_finite())
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - HALF_LOG_TWO_PI
        })
        .sum()
}

/// Style and task value networks over the same critic observation.
///
/// In single-critic mode only `v_task` is trained, on the summed reward.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub v_style: Mlp,
    pub v_task: Mlp,
}

impl CriticPair {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        let s = sizes(obs_dim, &cfg.critic_hidden, 1);
        Ok(Self {
            v_style: Mlp::new(&s, 1.0, rng)?,
            v_task: Mlp::new(&s, 1.0, rng)?,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.v_style.input_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.v_style.is_finite() && self.v_task.is_finite()
    }
}

/// The four compared training variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "APEX")]
    Apex,
    #[serde(rename = "APEX_Full")]
    ApexFull,
    #[serde(rename = "DM_Full")]
    DmFull,
    #[serde(rename = "DM_NIA")]
    DmNia,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Apex, Variant::ApexFull, Variant::DmFull, Variant::DmNia];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Apex => "APEX",
            Variant::ApexFull => "APEX_Full",
            Variant::DmFull => "DM_Full",
            Variant::DmNia => "DM_NIA",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.name().replace('_', "-").eq_ignore_ascii_case(s))
            .ok_or_else(|| ApexError::Config(format!("unknown variant {s:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature flags of a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: Variant,
    pub prior_enabled: bool,
    pub phase_in_actor: bool,
    pub ref_in_actor: bool,
    pub rsi_enabled: bool,
}

impl VariantConfig {
    pub fn new(name: Variant) -> Self {
        let (prior_enabled, phase_in_actor, ref_in_actor, rsi_enabled) = match name {
            Variant::Apex => (true, false, false, false),
            Variant::ApexFull => (true, true, true, true),
            Variant::DmFull => (false, true, true, true),
            Variant::DmNia => (false, true, false, true),
        };
        Self {
            name,
            prior_enabled,
            phase_in_actor,
            ref_in_actor,
            rsi_enabled,
        }
    }

    /// Rejects any flag combination that differs from the named variant.
    pub fn validate(&self) -> Result<()> {
        if *self == Self::new(self.name) {
            Ok(())
        } else {
            Err(ApexError::Config(format!(
                "flags {self:?} do not match variant {}",
                self.name
            )))
        }
    }
}

/// Density of `N(0, sigma^2)` helper used by tests elsewhere.
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
}
