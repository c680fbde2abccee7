//! Decaying action priors.
//!
//! The prior is a feedforward torque `kp * (q_ref - q)` added to the policy
//! action with coefficient `lambda^(t / k)`. Nothing here depends on policy
//! parameters.

use serde::{Deserialize, Serialize};

use crate::dynamics::PDGains;
use crate::error::{check_len, ApexError, Result};

/// What the decay exponent counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Cumulative per-environment control steps across the run.
    #[default]
    PerEnvSteps,
    /// Completed training iterations.
    PerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub lambda: f64,
    pub k: f64,
    pub enabled: bool,
    #[serde(default)]
    pub clock_mode: ClockMode,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            lambda: 0.99,
            k: 100.0,
            enabled: true,
            clock_mode: ClockMode::PerEnvSteps,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(ApexError::Config(format!("prior lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.k > 1.0 && self.k.is_finite()) {
            return Err(ApexError::Config(format!("prior k must exceed 1, got {}", self.k)));
        }
        Ok(())
    }
}

/// Decay clock owned by the trainer. Never reset at episode boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainingClock {
    pub t: u64,
}

impl TrainingClock {
    pub fn new(t: u64) -> Self {
        Self { t }
    }

    pub fn advance(&mut self, steps: u64) {
        self.t += steps;
    }
}

/// `kp * (q_ref - q)`, no derivative term.
pub fn prior_torque(gains: &PDGains, q_ref: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    let n = gains.kp.len();
    check_len("prior_torque::q_ref", n, q_ref.len())?;
    check_len("prior_torque::q", n, q.len())?;
    Ok((0..n).map(|i| gains.kp[i] * (q_ref[i] - q[i])).collect())
}

/// `lambda^(t / k)` when enabled, otherwise 0.
pub fn decay_coeff(clock: TrainingClock, cfg: &PriorConfig) -> f64 {
    if cfg.enabled {
        cfg.lambda.powf(clock.t as f64 / cfg.k)
    } else {
        0.0
    }
}

/// `action + c * beta`.
pub fn blend(action: &[f64], beta: &[f64], c: f64) -> Result<Vec<f64>> {
    check_len("blend", action.len(), beta.len())?;
    if !(0.0..=1.0).contains(&c) {
        return Err(ApexError::Range(format!("decay coefficient {c} outside [0, 1]")));
    }
    Ok(action.iter().zip(beta).map(|(a, b)| a + c * b).collect())
}
