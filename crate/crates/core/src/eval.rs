//! Deterministic evaluation with the prior switched off.

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, tip_position, tip_velocity_raw, ChainParams, ChainState};
use crate::error::{ApexError, Result};
use crate::policy::obs::build_actor_obs;
use crate::policy::GaussianPolicy;
use crate::ppo::env::{clip_time, default_start};
use crate::ppo::TrainConfig;
use crate::priors::{blend, prior_torque};
use crate::reference::{sample_reference, selector_value, GaitSpec, RefSample};
use crate::rewards::{style_reward, task_reward};

/// Tracking errors over all evaluated steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Joint angles against the reference, rad.
    pub q_rmse: f64,
    /// Tip height against the reference tip height, m.
    pub h_rmse: f64,
    /// Tip position against the reference tip, m.
    pub x_ee_rmse: f64,
    /// Tip horizontal velocity against the gait's velocity command, m/s.
    pub v_rmse: f64,
    /// Mean per-step total reward.
    pub mean_reward: f64,
    pub steps: usize,
    pub diverged_episodes: usize,
}

/// Running sums behind an [`EvalReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackingMetrics {
    sq_q: f64,
    n_q: usize,
    sq_h: f64,
    sq_x: f64,
    sq_v: f64,
    reward: f64,
    steps: usize,
    diverged: usize,
}

impl TrackingMetrics {
    pub fn add(&mut self, state: &ChainState, reference: &RefSample, gait: &GaitSpec, params: &ChainParams, reward: f64) {
        for (q, r) in state.q.iter().zip(&reference.q) {
            self.sq_q += (q - r) * (q - r);
        }
        self.n_q += state.q.len();
        let (x, z) = tip_position(&state.q, &params.link_lengths);
        let (rx, rz) = reference.tip;
        self.sq_h += (z - rz) * (z - rz);
        self.sq_x += (x - rx) * (x - rx) + (z - rz) * (z - rz);
        let (vx, _) = tip_velocity_raw(&state.q, &state.qdot, &params.link_lengths);
        self.sq_v += (vx - gait.velocity_cmd) * (vx - gait.velocity_cmd);
        self.reward += reward;
        self.steps += 1;
    }

    pub fn mark_diverged(&mut self) {
        self.diverged += 1;
    }

    pub fn report(&self) -> EvalReport {
        let per = |s: f64, n: usize| if n == 0 { 0.0 } else { (s / n as f64).sqrt() };
        EvalReport {
            q_rmse: per(self.sq_q, self.n_q),
            h_rmse: per(self.sq_h, self.steps),
            x_ee_rmse: per(self.sq_x, self.steps),
            v_rmse: per(self.sq_v, self.steps),
            mean_reward: if self.steps == 0 { 0.0 } else { self.reward / self.steps as f64 },
            steps: self.steps,
            diverged_episodes: self.diverged,
        }
    }
}

/// Anything that maps an actor observation to a torque.
pub trait Controller {
    fn action(&self, obs: &[f64]) -> Result<Vec<f64>>;
}

/// The deployed controller: the actor's mean.
impl Controller for GaussianPolicy {
    fn action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean(obs)
    }
}

/// States visited by one deterministic episode, with their reference frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ChainState>,
    pub rewards: Vec<f64>,
    pub diverged: bool,
}

/// Decay coefficient used on every evaluation path.
pub const EVAL_DECAY: f64 = 0.0;

/// Runs `steps` control steps on the nominal plant from the reference state
/// at `t0`, with the prior coefficient fixed at zero.
pub fn deterministic_rollout<C: Controller + ?Sized>(
    controller: &C,
    cfg: &TrainConfig,
    gait_index: usize,
    t0: f64,
    steps: usize,
) -> Result<Trajectory> {
    let gait = cfg
        .gaits
        .get(gait_index)
        .ok_or_else(|| ApexError::Range(format!("gait {gait_index} outside a library of {}", cfg.gaits.len())))?;
    let selector = selector_value(gait_index, cfg.gaits.len())?;
    let duration = cfg.gait_duration();
    let mut state = if t0 == 0.0 {
        default_start(gait)?
    } else {
        ChainState::new(gait.q_ref(t0), gait.qdot_ref(t0))?
    };
    let n = cfg.n_joints();
    let mut prev_action = vec![0.0; n];
    let mut t = t0;
    let mut out = Trajectory {
        times: Vec::with_capacity(steps),
        states: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        diverged: false,
    };
    for _ in 0..steps {
        let obs = build_actor_obs(&state, gait, &selector, &prev_action, &cfg.variant, clip_time(t, duration), &cfg.obs_scale)?;
        let action = controller.action(&obs)?;
        let r_now = sample_reference(gait, &cfg.chain, clip_time(t, duration))?;
        let beta = prior_torque(&cfg.gains, &r_now.q, &state.q)?;
        let executed = blend(&action, &beta, EVAL_DECAY)?;
        debug_assert_eq!(executed, action);
        let next = match step(&state, &executed, &cfg.chain) {
            Ok(s) => s,
            Err(ApexError::SimulationDiverged { .. }) => {
                out.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        t += cfg.chain.dt;
        let r = sample_reference(gait, &cfg.chain, clip_time(t, duration))?;
        let applied: Vec<f64> = executed.iter().map(|u| u.clamp(-cfg.chain.torque_limit, cfg.chain.torque_limit)).collect();
        let reward = style_reward(&next, &r, &cfg.chain, &cfg.rewards)?
            + task_reward(&next, gait, &cfg.chain, &applied, &action, &prev_action, &cfg.rewards)?;
        prev_action = action;
        state = next;
        out.times.push(t);
        out.states.push(state.clone());
        out.rewards.push(reward);
        if state.max_abs_angle() > cfg.divergence_threshold {
            out.diverged = true;
            break;
        }
    }
    Ok(out)
}

/// Scores a trajectory against the gait it was meant to track.
pub fn accumulate(metrics: &mut TrackingMetrics, traj: &Trajectory, cfg: &TrainConfig, gait_index: usize) -> Result<()> {
    let gait = &cfg.gaits[gait_index];
    let duration = cfg.gait_duration();
    for ((t, s), r) in traj.times.iter().zip(&traj.states).zip(&traj.rewards) {
        let reference = sample_reference(gait, &cfg.chain, clip_time(*t, duration))?;
        metrics.add(s, &reference, gait, &cfg.chain, *r);
    }
    if traj.diverged {
        metrics.mark_diverged();
    }
    Ok(())
}

/// Evaluates `episodes` deterministic episodes of `steps` control steps on
/// one gait. Episode `k` starts on the reference at `k / episodes` of the
/// clip; the first always starts at `t = 0`.
pub fn evaluate<C: Controller + ?Sized>(
    controller: &C,
    cfg: &TrainConfig,
    gait_index: usize,
    episodes: usize,
    steps: usize,
) -> Result<EvalReport> {
    let mut metrics = TrackingMetrics::default();
    for k in 0..episodes {
        let t0 = cfg.gait_duration() * k as f64 / episodes as f64;
        let traj = deterministic_rollout(controller, cfg, gait_index, t0, steps)?;
        accumulate(&mut metrics, &traj, cfg, gait_index)?;
    }
    Ok(metrics.report())
}

/// Mean of per-gait reports, weighting every step equally.
pub fn evaluate_gaits<C: Controller + ?Sized>(controller: &C, cfg: &TrainConfig, gaits: &[usize], steps: usize) -> Result<EvalReport> {
    let mut metrics = TrackingMetrics::default();
    for &g in gaits {
        let traj = deterministic_rollout(controller, cfg, g, 0.0, steps)?;
        accumulate(&mut metrics, &traj, cfg, g)?;
    }
    Ok(metrics.report())
}
