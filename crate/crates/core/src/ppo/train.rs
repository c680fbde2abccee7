//! The training loop and its per-iteration metrics.

use std::io::Write;

use super::env::ChainEnv;
use super::rollout::collect_rollout;
use super::update::{ppo_update, PpoLearner, UpdateStats};
use super::TrainConfig;
use crate::error::{ApexError, Result};
use crate::eval::{evaluate_gaits, EvalReport};
use crate::policy::obs::{actor_obs_dim, critic_obs_dim};
use crate::policy::{CriticPair, GaussianPolicy};
use crate::priors::{ClockMode, TrainingClock};
use crate::rng::{seeded, SimRng};

/// Stream 0 initializes networks, stream 1 shuffles minibatches, streams
/// from `ENV_STREAM_BASE` drive the environments.
const ENV_STREAM_BASE: u64 = 16;

/// One row of the metrics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub clock: u64,
    /// Decay coefficient at the start of the iteration's rollout.
    pub decay: f64,
    pub mean_style: f64,
    pub mean_task: f64,
    pub update: UpdateStats,
    pub rolled_back: bool,
    pub eval: EvalReport,
}

impl MetricsRow {
    pub const HEADER: &'static str = "iteration,clock,decay,mean_style_reward,mean_task_reward,mean_total_reward,\
policy_loss,value_loss_style,value_loss_task,entropy,clip_fraction,approx_kl,rolled_back,\
eval_q_rmse,eval_h_rmse,eval_x_ee_rmse,eval_v_rmse,eval_mean_reward";

    pub fn mean_total(&self) -> f64 {
        self.mean_style + self.mean_task
    }

    pub fn to_csv(&self) -> String {
        let u = &self.update;
        let e = &self.eval;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.clock,
            self.decay,
            self.mean_style,
            self.mean_task,
            self.mean_total(),
            u.policy_loss,
            u.value_loss_style,
            u.value_loss_task,
            u.entropy,
            u.clip_fraction,
            u.approx_kl,
            self.rolled_back as u8,
            e.q_rmse,
            e.h_rmse,
            e.x_ee_rmse,
            e.v_rmse,
            e.mean_reward
        )
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", MetricsRow::HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

/// Live training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub seed: u64,
    pub policy: GaussianPolicy,
    pub critics: CriticPair,
    pub clock: TrainingClock,
    pub iteration: usize,
    learner: PpoLearner,
    envs: Vec<ChainEnv>,
    shuffle_rng: SimRng,
}

impl Trainer {
    pub fn new(config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = config.n_joints();
        let mut init = seeded(seed, 0);
        let policy = GaussianPolicy::new(actor_obs_dim(n, &config.variant), n, &config.network, &mut init)?;
        let critics = CriticPair::new(critic_obs_dim(n, &config.variant), &config.network, &mut init)?;
        let learner = PpoLearner::new(&policy, &critics, config.ppo.lr);
        let envs = (0..config.ppo.n_envs)
            .map(|e| ChainEnv::new(&config, seeded(seed, ENV_STREAM_BASE + e as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed,
            policy,
            critics,
            clock: TrainingClock::default(),
            iteration: 0,
            learner,
            envs,
            shuffle_rng: seeded(seed, 1),
            config,
        })
    }

    /// Collect, estimate advantages, update, evaluate.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let cfg = &self.config;
        let (buffer, stats) = collect_rollout(&mut self.envs, &self.policy, &self.critics, cfg, &mut self.clock)?;
        if cfg.prior.clock_mode == ClockMode::PerIteration {
            self.clock.advance(1);
        }
        let targets = buffer.targets(&cfg.ppo)?;
        let (update, rolled_back) = match ppo_update(
            &mut self.policy,
            &mut self.critics,
            &mut self.learner,
            &buffer,
            &targets,
            &cfg.ppo,
            &mut self.shuffle_rng,
        ) {
            Ok(s) => (s, false),
            Err(ApexError::Numeric(_)) => (UpdateStats::default(), true),
            Err(e) => return Err(e),
        };
        self.iteration += 1;
        let eval = evaluate_gaits(&self.policy, cfg, &cfg.train_gaits, cfg.eval_steps)?;
        Ok(MetricsRow {
            iteration: self.iteration,
            clock: self.clock.t,
            decay: stats.decay,
            mean_style: stats.mean_style,
            mean_task: stats.mean_task,
            update,
            rolled_back,
            eval,
        })
    }
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    pub policy: GaussianPolicy,
    pub critics: CriticPair,
    pub clock: TrainingClock,
}

impl TrainOutcome {
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_metrics_csv(&self.metrics, out)
    }
}

/// Runs `config.ppo.iterations` iterations from scratch.
pub fn train(config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_with(config, seed, |_| {})
}

/// Like [`train`], calling `on_row` after every iteration.
pub fn train_with<F: FnMut(&MetricsRow)>(config: &TrainConfig, seed: u64, mut on_row: F) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), seed)?;
    let mut metrics = Vec::with_capacity(config.ppo.iterations);
    for _ in 0..config.ppo.iterations {
        let row = trainer.step()?;
        on_row(&row);
        metrics.push(row);
    }
    Ok(TrainOutcome {
        config: trainer.config,
        seed,
        metrics,
        policy: trainer.policy,
        critics: trainer.critics,
        clock: trainer.clock,
    })
}
