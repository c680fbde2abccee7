//! Fixed-size rollout storage.
//!
//! Row `t * n_envs + e` holds time step `t` of environment `e`.

use ndarray::Array2;

use super::gae::{combine_advantages, compute_gae, normalize_single};
use super::{CriticMode, PPOConfig};
use crate::error::{check_len, Result};

/// Everything recorded for one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<'a> {
    pub actor_obs: &'a [f64],
    pub critic_obs: &'a [f64],
    /// Policy action `a_t`, before the prior is blended in.
    pub action: &'a [f64],
    /// Log density of `action` under the behaviour policy.
    pub log_prob: f64,
    pub reward_style: f64,
    pub reward_task: f64,
    pub value_style: f64,
    pub value_task: f64,
    pub done: bool,
    /// Blended torque `u_t` sent to the plant.
    pub executed: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    horizon: usize,
    n_envs: usize,
    pub actor_obs: Array2<f64>,
    pub critic_obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub executed: Array2<f64>,
    pub log_probs: Vec<f64>,
    pub reward_style: Vec<f64>,
    pub reward_task: Vec<f64>,
    pub value_style: Vec<f64>,
    pub value_task: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value estimates of the state after the last step, per environment.
    pub bootstrap_style: Vec<f64>,
    pub bootstrap_task: Vec<f64>,
    /// Value estimates of the final state of episodes cut by the time
    /// limit, at the step that hit it; zero elsewhere.
    pub truncation_style: Vec<f64>,
    pub truncation_task: Vec<f64>,
    filled: Vec<bool>,
}

/// Training targets derived from a full buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    /// Combined, standardized advantage per row.
    pub advantages: Vec<f64>,
    pub returns_style: Vec<f64>,
    /// Task returns, or total-reward returns in single-critic mode.
    pub returns_task: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(horizon: usize, n_envs: usize, actor_dim: usize, critic_dim: usize, act_dim: usize) -> Self {
        let rows = horizon * n_envs;
        Self {
            horizon,
            n_envs,
            actor_obs: Array2::zeros((rows, actor_dim)),
            critic_obs: Array2::zeros((rows, critic_dim)),
            actions: Array2::zeros((rows, act_dim)),
            executed: Array2::zeros((rows, act_dim)),
            log_probs: vec![0.0; rows],
            reward_style: vec![0.0; rows],
            reward_task: vec![0.0; rows],
            value_style: vec![0.0; rows],
            value_task: vec![0.0; rows],
            dones: vec![false; rows],
            bootstrap_style: vec![0.0; n_envs],
            bootstrap_task: vec![0.0; n_envs],
            truncation_style: vec![0.0; rows],
            truncation_task: vec![0.0; rows],
            filled: vec![false; rows],
        }
    }

    /// `(horizon, n_envs)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.horizon, self.n_envs)
    }

    pub fn len(&self) -> usize {
        self.horizon * self.n_envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, t: usize, env: usize) -> usize {
        debug_assert!(t < self.horizon && env < self.n_envs);
        t * self.n_envs + env
    }

    pub fn is_full(&self) -> bool {
        self.filled.iter().all(|f| *f)
    }

    pub fn record(&mut self, t: usize, env: usize, step: StepRecord<'_>) -> Result<()> {
        check_len("buffer::actor_obs", self.actor_obs.ncols(), step.actor_obs.len())?;
        check_len("buffer::critic_obs", self.critic_obs.ncols(), step.critic_obs.len())?;
        check_len("buffer::action", self.actions.ncols(), step.action.len())?;
        check_len("buffer::executed", self.executed.ncols(), step.executed.len())?;
        let r = self.row(t, env);
        copy_row(&mut self.actor_obs, r, step.actor_obs);
        copy_row(&mut self.critic_obs, r, step.critic_obs);
        copy_row(&mut self.actions, r, step.action);
        copy_row(&mut self.executed, r, step.executed);
        self.log_probs[r] = step.log_prob;
        self.reward_style[r] = step.reward_style;
        self.reward_task[r] = step.reward_task;
        self.value_style[r] = step.value_style;
        self.value_task[r] = step.value_task;
        self.dones[r] = step.done;
        self.filled[r] = true;
        Ok(())
    }

    /// Marks step `t` of `env` as a time-limit cut whose final state has
    /// the given value estimates.
    pub fn set_truncation(&mut self, t: usize, env: usize, style: f64, task: f64) {
        let r = self.row(t, env);
        self.truncation_style[r] = style;
        self.truncation_task[r] = task;
    }

    /// Rewards of one environment with `gamma * V(final state)` folded into
    /// time-limit steps.
    fn bootstrapped(&self, xs: &[f64], trunc: &[f64], env: usize, gamma: f64) -> Vec<f64> {
        (0..self.horizon)
            .map(|t| {
                let r = self.row(t, env);
                xs[r] + gamma * trunc[r]
            })
            .collect()
    }

    fn column(&self, xs: &[f64], env: usize) -> Vec<f64> {
        (0..self.horizon).map(|t| xs[self.row(t, env)]).collect()
    }

    /// Per-critic GAE along each environment's trajectory, then the
    /// combined advantage. Panics if the buffer is not full.
    pub fn targets(&self, cfg: &PPOConfig) -> Result<Targets> {
        assert!(self.is_full(), "advantages requested before the buffer was filled");
        let n = self.len();
        let mut adv_style = vec![0.0; n];
        let mut adv_task = vec![0.0; n];
        let mut returns_style = vec![0.0; n];
        let mut returns_task = vec![0.0; n];
        let single = cfg.critic_mode == CriticMode::Single;
        for e in 0..self.n_envs {
            let dones: Vec<bool> = (0..self.horizon).map(|t| self.dones[self.row(t, e)]).collect();
            let rs = self.bootstrapped(&self.reward_style, &self.truncation_style, e, cfg.gamma);
            let rt = self.bootstrapped(&self.reward_task, &self.truncation_task, e, cfg.gamma);
            let vt = self.column(&self.value_task, e);
            let (at, gt) = if single {
                let total: Vec<f64> = (0..self.horizon)
                    .map(|t| {
                        let r = self.row(t, e);
                        self.reward_style[r] + self.reward_task[r] + cfg.gamma * self.truncation_task[r]
                    })
                    .collect();
                compute_gae(&total, &vt, self.bootstrap_task[e], &dones, cfg.gamma, cfg.gae_lambda)?
            } else {
                compute_gae(&rt, &vt, self.bootstrap_task[e], &dones, cfg.gamma, cfg.gae_lambda)?
            };
            let (as_, gs) = if single {
                (vec![0.0; self.horizon], vec![0.0; self.horizon])
            } else {
                let vs = self.column(&self.value_style, e);
                compute_gae(&rs, &vs, self.bootstrap_style[e], &dones, cfg.gamma, cfg.gae_lambda)?
            };
            for t in 0..self.horizon {
                let r = self.row(t, e);
                adv_style[r] = as_[t];
                adv_task[r] = at[t];
                returns_style[r] = gs[t];
                returns_task[r] = gt[t];
            }
        }
        let advantages = if single {
            normalize_single(&adv_task)
        } else {
            combine_advantages(&adv_style, &adv_task, cfg.advantage_weights)?
        };
        Ok(Targets {
            advantages,
            returns_style,
            returns_task,
        })
    }
}

fn copy_row(m: &mut Array2<f64>, r: usize, xs: &[f64]) {
    m.row_mut(r).iter_mut().zip(xs).for_each(|(d, s)| *d = *s);
}
