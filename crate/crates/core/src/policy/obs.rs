//! Observation layouts.
//!
//! Actor, in order:
//!
//! | block            | size | present when      |
//! |------------------|------|-------------------|
//! | q                | n    | always            |
//! | qdot * qdot_scale| n    | always            |
//! | prev_action * action_scale | n | always    |
//! | velocity command | 1    | always            |
//! | selector value   | 1    | always            |
//! | sin, cos of phase| 2    | `phase_in_actor`  |
//! | reference q      | n    | `ref_in_actor`    |
//!
//! Critic: the actor observation followed by tip velocity (2), reference q
//! (n) and reference qdot (n), unscaled.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::ChainState;
use crate::error::{check_len, Result};
use crate::policy::VariantConfig;
use crate::reference::{phase, GaitSpec, RefSample, SkillSelector};

/// Fixed observation scaling, declared in the run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsScale {
    pub qdot: f64,
    pub action: f64,
}

impl Default for ObsScale {
    fn default() -> Self {
        Self { qdot: 0.25, action: 0.2 }
    }
}

pub fn actor_obs_dim(n_joints: usize, variant: &VariantConfig) -> usize {
    3 * n_joints + 2 + if variant.phase_in_actor { 2 } else { 0 } + if variant.ref_in_actor { n_joints } else { 0 }
}

pub fn critic_obs_dim(n_joints: usize, variant: &VariantConfig) -> usize {
    actor_obs_dim(n_joints, variant) + 2 + 2 * n_joints
}

#[allow(clippy::too_many_arguments)]
pub fn build_actor_obs(
    state: &ChainState,
    gait: &GaitSpec,
    selector: &SkillSelector,
    prev_action: &[f64],
    variant: &VariantConfig,
    episode_time: f64,
    scale: &ObsScale,
) -> Result<Vec<f64>> {
    let n = state.q.len();
    check_len("actor_obs::qdot", n, state.qdot.len())?;
    check_len("actor_obs::prev_action", n, prev_action.len())?;
    check_len("actor_obs::gait", n, gait.n_joints())?;
    let mut obs = Vec::with_capacity(actor_obs_dim(n, variant));
    obs.extend_from_slice(&state.q);
    obs.extend(state.qdot.iter().map(|v| v * scale.qdot));
    obs.extend(prev_action.iter().map(|a| a * scale.action));
    obs.push(gait.velocity_cmd);
    obs.push(selector.value);
    if variant.phase_in_actor {
        let phi = phase(gait, episode_time);
        obs.push((TAU * phi).sin());
        obs.push((TAU * phi).cos());
    }
    if variant.ref_in_actor {
        obs.extend(gait.q_ref(episode_time));
    }
    Ok(obs)
}

pub fn build_critic_obs(actor_obs: &[f64], reference: &RefSample, tip_velocity: (f64, f64)) -> Vec<f64> {
    let mut obs = Vec::with_capacity(actor_obs.len() + 2 + 2 * reference.q.len());
    obs.extend_from_slice(actor_obs);
    obs.push(tip_velocity.0);
    obs.push(tip_velocity.1);
    obs.extend_from_slice(&reference.q);
    obs.extend_from_slice(&reference.qdot);
    obs
}
