//! Experience collection with prior blending.

use ndarray::Array2;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use super::buffer::{RolloutBuffer, StepRecord};
use super::env::ChainEnv;
use super::{CriticMode, PPOConfig, TrainConfig};
use crate::dynamics::ChainState;
use crate::error::{ApexError, Result};
use crate::policy::{gaussian_log_prob, CriticPair, GaussianPolicy};
use crate::priors::{decay_coeff, ClockMode, TrainingClock};
use crate::reference::MotionClip;

/// Reward means over one rollout.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RolloutStats {
    pub mean_style: f64,
    pub mean_task: f64,
    /// Decay coefficient in effect at the first step.
    pub decay: f64,
    pub episodes_done: usize,
}

/// Samples `t0` uniformly over the clip duration and returns the reference
/// state there together with `t0`.
pub fn reference_state_init<R: Rng + ?Sized>(clip: &MotionClip, rng: &mut R) -> Result<(ChainState, f64)> {
    if clip.is_empty() {
        return Err(ApexError::Config("reference state init needs a nonempty clip".into()));
    }
    let t0 = if clip.duration > 0.0 {
        rng.random::<f64>() * clip.duration
    } else {
        0.0
    };
    let state = ChainState::new(clip.gait.q_ref(t0), clip.gait.qdot_ref(t0))?;
    Ok((state, t0))
}

fn stack(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

/// Value estimates in return units (network output times `value_scale`).
pub fn values(critics: &CriticPair, ppo: &PPOConfig, obs: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let scaled = |net: &crate::policy::Mlp| -> Result<Vec<f64>> {
        Ok(net.forward(obs.view())?.column(0).iter().map(|v| v * ppo.value_scale).collect())
    };
    let task = scaled(&critics.v_task)?;
    let style = match ppo.critic_mode {
        CriticMode::Multi => scaled(&critics.v_style)?,
        CriticMode::Single => vec![0.0; obs.nrows()],
    };
    Ok((style, task))
}

/// Runs `horizon` steps in every environment. Actor and critic inference
/// is batched across environments; each environment draws its action noise
/// from its own stream.
pub fn collect_rollout(
    envs: &mut [ChainEnv],
    policy: &GaussianPolicy,
    critics: &CriticPair,
    cfg: &TrainConfig,
    clock: &mut TrainingClock,
) -> Result<(RolloutBuffer, RolloutStats)> {
    let horizon = cfg.ppo.horizon;
    let n_envs = envs.len();
    let act_dim = policy.act_dim();
    let mut buffer = RolloutBuffer::new(horizon, n_envs, policy.obs_dim(), critics.obs_dim(), act_dim);
    let mut stats = RolloutStats::default();
    let prior_on = cfg.prior_active();
    stats.decay = if prior_on { decay_coeff(*clock, &cfg.prior) } else { 0.0 };

    for t in 0..horizon {
        let c = if prior_on { decay_coeff(*clock, &cfg.prior) } else { 0.0 };
        let actor_rows = envs.iter().map(|e| e.actor_obs(cfg)).collect::<Result<Vec<_>>>()?;
        let critic_rows = envs
            .iter()
            .zip(&actor_rows)
            .map(|(e, a)| e.critic_obs(cfg, a))
            .collect::<Result<Vec<_>>>()?;
        let means = policy.mean_net.forward(stack(&actor_rows).view())?;
        if means.iter().any(|m| !m.is_finite()) {
            return Err(ApexError::Numeric("actor produced a non-finite mean".into()));
        }
        let (v_style, v_task) = values(critics, &cfg.ppo, &stack(&critic_rows))?;

        let mut truncated = Vec::new();
        for (e, env) in envs.iter_mut().enumerate() {
            let mean = means.row(e).to_vec();
            let action: Vec<f64> = mean
                .iter()
                .zip(&policy.log_std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(env.rng_mut());
                    m + s.exp() * z
                })
                .collect();
            let log_prob = gaussian_log_prob(&mean, &policy.log_std, &action);
            let tr = env.step(cfg, &action, c)?;
            buffer.record(
                t,
                e,
                StepRecord {
                    actor_obs: &actor_rows[e],
                    critic_obs: &critic_rows[e],
                    action: &action,
                    log_prob,
                    reward_style: tr.rewards.style,
                    reward_task: tr.rewards.task,
                    value_style: v_style[e],
                    value_task: v_task[e],
                    done: tr.done,
                    executed: &tr.executed,
                },
            )?;
            stats.mean_style += tr.rewards.style;
            stats.mean_task += tr.rewards.task;
            stats.episodes_done += tr.done as usize;
            if let Some(obs) = tr.truncated_obs {
                truncated.push((e, obs));
            }
        }
        if !truncated.is_empty() {
            let rows: Vec<Vec<f64>> = truncated.iter().map(|(_, o)| o.clone()).collect();
            let (vs, vt) = values(critics, &cfg.ppo, &stack(&rows))?;
            for (k, (e, _)) in truncated.iter().enumerate() {
                buffer.set_truncation(t, *e, vs[k], vt[k]);
            }
        }
        if cfg.prior.clock_mode == ClockMode::PerEnvSteps {
            clock.advance(1);
        }
    }

    let critic_rows = envs
        .iter()
        .map(|e| e.actor_obs(cfg).and_then(|a| e.critic_obs(cfg, &a)))
        .collect::<Result<Vec<_>>>()?;
    let (bs, bt) = values(critics, &cfg.ppo, &stack(&critic_rows))?;
    buffer.bootstrap_style = bs;
    buffer.bootstrap_task = bt;

    let n = (horizon * n_envs) as f64;
    stats.mean_style /= n;
    stats.mean_task /= n;
    Ok((buffer, stats))
}
