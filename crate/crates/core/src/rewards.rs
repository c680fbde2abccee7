//! Two-group reward: style (reference tracking) and task + regularization.
//!
//! Chain analogues of the legged-robot terms:
//!
//! | legged term              | chain term                         |
//! |--------------------------|------------------------------------|
//! | base linear velocity     | tip horizontal velocity            |
//! | base angular velocity    | last-link angular rate             |
//! | base orientation         | last-link absolute angle           |
//! | foot position            | tip position                       |
//! | base height              | tip height                         |
//!
//! Feet slip has no counterpart without contacts and is not modelled.

use serde::{Deserialize, Serialize};

use crate::dynamics::{tip_angle, tip_angular_rate, tip_position, tip_velocity_raw, ChainParams, ChainState};
use crate::error::{check_len, ApexError, Result};
use crate::reference::{GaitSpec, RefSample};

/// Weight and kernel sensitivity of one tracking term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingTerm {
    pub weight: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub lin_vel: TrackingTerm,
    pub ang_vel: TrackingTerm,
    pub torque_weight: f64,
    pub action_rate_weight: f64,
    pub height_weight: f64,
    pub joint_track: TrackingTerm,
    pub ee_track: TrackingTerm,
    pub orient_track: TrackingTerm,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lin_vel: TrackingTerm { weight: 1.0, sigma: 0.3 },
            ang_vel: TrackingTerm { weight: 0.9, sigma: 0.25 },
            torque_weight: -0.0001,
            action_rate_weight: -0.01,
            height_weight: -30.0,
            joint_track: TrackingTerm { weight: 1.5, sigma: 0.01 },
            ee_track: TrackingTerm { weight: 1.5, sigma: 0.01 },
            orient_track: TrackingTerm { weight: 1.5, sigma: 0.15 },
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let terms = [self.lin_vel, self.ang_vel, self.joint_track, self.ee_track, self.orient_track];
        if terms.iter().any(|t| !(t.sigma > 0.0 && t.sigma.is_finite())) {
            return Err(ApexError::Config("reward sigmas must be positive".into()));
        }
        let weights = [self.torque_weight, self.action_rate_weight, self.height_weight];
        if terms.iter().map(|t| t.weight).chain(weights).any(|w| !w.is_finite()) {
            return Err(ApexError::Config("reward weights must be finite".into()));
        }
        Ok(())
    }
}

/// Per-step reward split by critic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardGroups {
    pub style: f64,
    pub task: f64,
}

impl RewardGroups {
    pub fn total(&self) -> f64 {
        self.style + self.task
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardGroup {
    Style,
    Task,
}

/// `exp(-|e|^2 / sigma)`.
pub fn tracking_kernel(e: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(ApexError::Config(format!("kernel sigma must be positive, got {sigma}")));
    }
    Ok(kernel_sq(e.iter().map(|x| x * x).sum(), sigma))
}

fn kernel_sq(err_sq: f64, sigma: f64) -> f64 {
    (-err_sq / sigma).exp()
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Joint, tip-position and tip-orientation tracking.
pub fn style_reward(state: &ChainState, reference: &RefSample, params: &ChainParams, cfg: &RewardConfig) -> Result<f64> {
    let n = params.n_joints;
    check_len("style_reward::q", n, state.q.len())?;
    check_len("style_reward::q_ref", n, reference.q.len())?;
    let joint = diff_sq(&state.q, &reference.q);
    let (x, z) = tip_position(&state.q, &params.link_lengths);
    let ee = (x - reference.tip.0).powi(2) + (z - reference.tip.1).powi(2);
    let orient = (tip_angle(&state.q) - tip_angle(&reference.q)).powi(2);
    Ok(cfg.joint_track.weight * kernel_sq(joint, cfg.joint_track.sigma)
        + cfg.ee_track.weight * kernel_sq(ee, cfg.ee_track.sigma)
        + cfg.orient_track.weight * kernel_sq(orient, cfg.orient_track.sigma))
}

/// Command tracking plus torque, action-rate and height penalties.
pub fn task_reward(
    state: &ChainState,
    gait: &GaitSpec,
    params: &ChainParams,
    torque: &[f64],
    action: &[f64],
    prev_action: &[f64],
    cfg: &RewardConfig,
) -> Result<f64> {
    let n = params.n_joints;
    check_len("task_reward::q", n, state.q.len())?;
    check_len("task_reward::torque", n, torque.len())?;
    check_len("task_reward::action", n, action.len())?;
    check_len("task_reward::prev_action", n, prev_action.len())?;
    let (vx, _) = tip_velocity_raw(&state.q, &state.qdot, &params.link_lengths);
    let omega = tip_angular_rate(&state.qdot);
    let (_, z) = tip_position(&state.q, &params.link_lengths);
    let torque_sq: f64 = torque.iter().map(|t| t * t).sum();
    let rate_sq = diff_sq(action, prev_action);
    Ok(cfg.lin_vel.weight * kernel_sq((vx - gait.velocity_cmd).powi(2), cfg.lin_vel.sigma)
        + cfg.ang_vel.weight * kernel_sq((omega - gait.angular_cmd).powi(2), cfg.ang_vel.sigma)
        + cfg.torque_weight * torque_sq
        + cfg.action_rate_weight * rate_sq
        + cfg.height_weight * (z - gait.tip_height_cmd).powi(2))
}

/// Copy of `cfg` with one group's sigmas multiplied by `sigma_scale` and its
/// weights by `weight_scale`.
pub fn scale_config(cfg: &RewardConfig, sigma_scale: f64, weight_scale: f64, group: RewardGroup) -> RewardConfig {
    let mut out = cfg.clone();
    let scale = |t: &mut TrackingTerm| {
        t.sigma *= sigma_scale;
        t.weight *= weight_scale;
    };
    match group {
        RewardGroup::Style => {
            scale(&mut out.joint_track);
            scale(&mut out.ee_track);
            scale(&mut out.orient_track);
        }
        RewardGroup::Task => {
            scale(&mut out.lin_vel);
            scale(&mut out.ang_vel);
            out.torque_weight *= weight_scale;
            out.action_rate_weight *= weight_scale;
            out.height_weight *= weight_scale;
        }
    }
    out
}
