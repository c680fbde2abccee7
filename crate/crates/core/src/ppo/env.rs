//! One training environment: a randomized chain tracking one gait.

use rand::RngExt;

use crate::dynamics::{
    apply_push, clamp_torque, randomize, step, tip_velocity_raw, ChainParams, ChainState, PDGains,
    PushSchedule,
};
use crate::error::{ApexError, Result};
use crate::policy::obs::{build_actor_obs, build_critic_obs};
use crate::priors::{blend, prior_torque};
use crate::reference::{sample_reference, selector_value, GaitSpec, MotionClip, RefSample, SkillSelector};
use crate::rewards::{style_reward, task_reward, RewardGroups};
use crate::rng::SimRng;

use super::rollout::reference_state_init;
use super::TrainConfig;

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub rewards: RewardGroups,
    /// Executed (blended, pre-clamp) torque.
    pub executed: Vec<f64>,
    /// Torque actually applied after clamping.
    pub applied: Vec<f64>,
    pub done: bool,
    pub diverged: bool,
    /// Critic observation of the final state when the episode hit the time
    /// limit, taken before the reset.
    pub truncated_obs: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ChainEnv {
    params: ChainParams,
    gains: PDGains,
    state: ChainState,
    gait_index: usize,
    episode_time: f64,
    episode_step: usize,
    prev_action: Vec<f64>,
    push: PushSchedule,
    time_since_push: f64,
    rng: SimRng,
}

impl ChainEnv {
    pub fn new(cfg: &TrainConfig, rng: SimRng) -> Result<Self> {
        let n = cfg.n_joints();
        let mut env = Self {
            params: cfg.chain.clone(),
            gains: cfg.gains.clone(),
            state: ChainState::at_rest(n),
            gait_index: cfg.train_gaits[0],
            episode_time: 0.0,
            episode_step: 0,
            prev_action: vec![0.0; n],
            push: PushSchedule { threshold: f64::INFINITY },
            time_since_push: 0.0,
            rng,
        };
        env.reset(cfg)?;
        Ok(env)
    }

    /// Starts a new episode: draws a gait, domain-randomizes the plant and
    /// places the chain on the reference (at a random time when the variant
    /// uses reference state initialization, at `t = 0` otherwise).
    pub fn reset(&mut self, cfg: &TrainConfig) -> Result<()> {
        let k = self.rng.random_range(0..cfg.train_gaits.len());
        self.gait_index = cfg.train_gaits[k];
        let (p, g) = randomize(&cfg.chain, &cfg.gains, &cfg.dr, &mut self.rng);
        self.params = p;
        self.gains = g;
        let gait = &cfg.gaits[self.gait_index];
        if cfg.variant.rsi_enabled {
            let clip = MotionClip::generate(gait, &cfg.chain, cfg.gait_duration(), cfg.chain.dt)?;
            let (state, t0) = reference_state_init(&clip, &mut self.rng)?;
            self.state = state;
            self.episode_time = t0;
        } else {
            self.state = default_start(gait)?;
            self.episode_time = 0.0;
        }
        self.episode_step = 0;
        self.prev_action = vec![0.0; cfg.n_joints()];
        self.push = PushSchedule::sample(&cfg.dr, &mut self.rng);
        self.time_since_push = 0.0;
        Ok(())
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn gait_index(&self) -> usize {
        self.gait_index
    }

    pub fn episode_time(&self) -> f64 {
        self.episode_time
    }

    pub fn selector(&self, cfg: &TrainConfig) -> SkillSelector {
        selector_value(self.gait_index, cfg.gaits.len()).expect("gait index within library")
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Reference frame at the current episode time, looping the clip.
    pub fn reference(&self, cfg: &TrainConfig) -> Result<RefSample> {
        let t = clip_time(self.episode_time, cfg.gait_duration());
        sample_reference(&cfg.gaits[self.gait_index], &cfg.chain, t)
    }

    pub fn actor_obs(&self, cfg: &TrainConfig) -> Result<Vec<f64>> {
        let t = clip_time(self.episode_time, cfg.gait_duration());
        build_actor_obs(
            &self.state,
            &cfg.gaits[self.gait_index],
            &self.selector(cfg),
            &self.prev_action,
            &cfg.variant,
            t,
            &cfg.obs_scale,
        )
    }

    pub fn critic_obs(&self, cfg: &TrainConfig, actor_obs: &[f64]) -> Result<Vec<f64>> {
        let r = self.reference(cfg)?;
        let v = tip_velocity_raw(&self.state.q, &self.state.qdot, &cfg.chain.link_lengths);
        Ok(build_critic_obs(actor_obs, &r, v))
    }

    /// Prior torque `kp * (q_ref - q)` for the current state.
    pub fn prior(&self, cfg: &TrainConfig) -> Result<Vec<f64>> {
        let r = self.reference(cfg)?;
        prior_torque(&self.gains, &r.q, &self.state.q)
    }

    /// Applies `action + c * prior`, advances the plant and scores the
    /// result. Resets automatically when the episode ends.
    pub fn step(&mut self, cfg: &TrainConfig, action: &[f64], c: f64) -> Result<Transition> {
        let beta = self.prior(cfg)?;
        let executed = blend(action, &beta, c)?;
        let applied = clamp_torque(&executed, self.params.torque_limit);
        debug_assert!(applied.iter().all(|t| t.abs() <= self.params.torque_limit));

        let next = step(&self.state, &executed, &self.params);
        self.episode_time += cfg.chain.dt;
        self.episode_step += 1;
        let (rewards, diverged) = match next {
            Ok(next) => {
                self.state = next;
                let r = self.reference(cfg)?;
                let gait = &cfg.gaits[self.gait_index];
                let style = style_reward(&self.state, &r, &cfg.chain, &cfg.rewards)?;
                let task = task_reward(&self.state, gait, &cfg.chain, &applied, action, &self.prev_action, &cfg.rewards)?;
                let out_of_range = self.state.max_abs_angle() > cfg.divergence_threshold;
                (RewardGroups { style, task }, out_of_range)
            }
            Err(ApexError::SimulationDiverged { .. }) => (RewardGroups::default(), true),
            Err(e) => return Err(e),
        };
        self.prev_action = action.to_vec();

        self.time_since_push += cfg.chain.dt;
        let (pushed, reset_timer) = apply_push(&self.state, &cfg.dr, &self.push, &mut self.rng, self.time_since_push);
        self.state = pushed;
        if reset_timer {
            self.time_since_push = 0.0;
        }

        let done = diverged || self.episode_step >= cfg.episode_steps;
        let truncated_obs = if done && !diverged {
            let a = self.actor_obs(cfg)?;
            Some(self.critic_obs(cfg, &a)?)
        } else {
            None
        };
        if done {
            self.reset(cfg)?;
        }
        Ok(Transition {
            rewards,
            executed,
            applied,
            done,
            diverged,
            truncated_obs,
        })
    }
}

/// Reference state at `t = 0`: the fixed, non-randomized episode start.
pub fn default_start(gait: &GaitSpec) -> Result<ChainState> {
    ChainState::new(gait.q_ref(0.0), gait.qdot_ref(0.0))
}

pub(crate) fn clip_time(t: f64, duration: f64) -> f64 {
    if duration > 0.0 {
        t.rem_euclid(duration)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Variant;
    use crate::rng::seeded;

    #[test]
    fn non_rsi_starts_on_reference_at_zero() {
        let cfg = TrainConfig::new(Variant::Apex);
        let env = ChainEnv::new(&cfg, seeded(1, 0)).unwrap();
        assert_eq!(env.episode_time(), 0.0);
        let r = env.reference(&cfg).unwrap();
        assert_eq!(env.state().q, r.q);
        assert_eq!(env.state().qdot, r.qdot);
    }

    #[test]
    fn zero_coefficient_executes_the_action() {
        let cfg = TrainConfig::new(Variant::DmNia);
        let mut env = ChainEnv::new(&cfg, seeded(2, 0)).unwrap();
        let a = vec![0.3; 8];
        let tr = env.step(&cfg, &a, 0.0).unwrap();
        assert_eq!(tr.executed, a);
    }

    #[test]
    fn timeout_resets_episode() {
        let mut cfg = TrainConfig::new(Variant::Apex);
        cfg.episode_steps = 5;
        let mut env = ChainEnv::new(&cfg, seeded(3, 0)).unwrap();
        let mut dones = Vec::new();
        for _ in 0..10 {
            dones.push(env.step(&cfg, &[0.0; 8], 1.0).unwrap().done);
        }
        assert_eq!(dones.iter().filter(|d| **d).count(), 2);
        assert!(dones[4] && dones[9]);
    }

    #[test]
    fn huge_torque_terminates_without_crashing() {
        let mut cfg = TrainConfig::new(Variant::Apex);
        cfg.chain.torque_limit = 1e6;
        cfg.divergence_threshold = 1.0;
        let mut env = ChainEnv::new(&cfg, seeded(4, 0)).unwrap();
        let mut saw_done = false;
        for _ in 0..50 {
            let tr = env.step(&cfg, &[1e5; 8], 0.0).unwrap();
            if tr.diverged {
                saw_done = tr.done;
                break;
            }
        }
        assert!(saw_done);
    }
}
