//! Multi-critic PPO.

pub mod buffer;
pub mod env;
pub mod gae;
pub mod rollout;
pub mod train;
pub mod update;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ChainParams, DRConfig, PDGains};
use crate::error::{ApexError, Result};
use crate::policy::obs::ObsScale;
use crate::policy::{NetworkConfig, Variant, VariantConfig};
use crate::priors::PriorConfig;
use crate::reference::{calibrated_gait_library, GaitSpec};
use crate::rewards::RewardConfig;

pub use buffer::RolloutBuffer;
pub use env::ChainEnv;
pub use gae::{combine_advantages, compute_gae};
pub use rollout::{collect_rollout, reference_state_init};
pub use train::{train, MetricsRow, TrainOutcome, Trainer};
pub use update::{ppo_update, PpoLearner, UpdateStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    /// Separate style and task critics, each with its own advantage stream.
    #[default]
    Multi,
    /// One critic on the summed reward (ablation).
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PPOConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    /// Control steps per environment per iteration.
    pub horizon: usize,
    pub n_envs: usize,
    pub iterations: usize,
    pub max_grad_norm: f64,
    #[serde(default)]
    pub critic_mode: CriticMode,
    /// Weights of the (style, task) streams in the combined advantage.
    #[serde(default = "default_stream_weights")]
    pub advantage_weights: (f64, f64),
    /// Critic outputs are multiplied by this to give values in return units.
    pub value_scale: f64,
}

fn default_stream_weights() -> (f64, f64) {
    (1.0, 1.0)
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatches: 4,
            lr: 1e-3,
            entropy_coef: 0.0,
            horizon: 42,
            n_envs: 32,
            iterations: 500,
            max_grad_norm: 1.0,
            critic_mode: CriticMode::Multi,
            advantage_weights: default_stream_weights(),
            value_scale: 100.0,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(ApexError::Config("gamma and gae_lambda must lie in (0, 1]".into()));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps <= 0.5) {
            return Err(ApexError::Config("clip_eps must lie in (0, 0.5]".into()));
        }
        if self.epochs == 0 || self.minibatches == 0 || self.horizon == 0 || self.n_envs == 0 {
            return Err(ApexError::Config("epochs, minibatches, horizon and n_envs must be positive".into()));
        }
        if !(self.horizon * self.n_envs).is_multiple_of(self.minibatches) {
            return Err(ApexError::Config(format!(
                "horizon * n_envs = {} is not divisible by minibatches = {}",
                self.horizon * self.n_envs,
                self.minibatches
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.max_grad_norm > 0.0) {
            return Err(ApexError::Config("lr and max_grad_norm must be positive".into()));
        }
        if !(self.value_scale > 0.0 && self.value_scale.is_finite()) {
            return Err(ApexError::Config("value_scale must be positive".into()));
        }
        if !self.entropy_coef.is_finite() {
            return Err(ApexError::Config("entropy_coef must be finite".into()));
        }
        Ok(())
    }
}

/// Everything that determines a training run except the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: VariantConfig,
    pub chain: ChainParams,
    pub gains: PDGains,
    /// The full motion library; selector values are `index / gaits.len()`.
    pub gaits: Vec<GaitSpec>,
    /// Library indices trained on. Each episode draws one uniformly.
    pub train_gaits: Vec<usize>,
    pub rewards: RewardConfig,
    pub prior: PriorConfig,
    pub ppo: PPOConfig,
    pub dr: DRConfig,
    pub network: NetworkConfig,
    pub obs_scale: ObsScale,
    /// Control steps before an episode times out.
    pub episode_steps: usize,
    /// `|q_i|` beyond this terminates the episode.
    pub divergence_threshold: f64,
    /// Control steps of the per-iteration evaluation rollout, per gait.
    pub eval_steps: usize,
}

impl TrainConfig {
    /// 8-joint chain, trot gait, nominal defaults.
    pub fn new(variant: Variant) -> Self {
        let chain = ChainParams::uniform(8);
        let gaits = calibrated_gait_library(&chain).expect("8 joints is enough for the library");
        Self {
            variant: VariantConfig::new(variant),
            gains: PDGains::uniform(8, 25.0, 0.5),
            gaits,
            train_gaits: vec![2],
            chain,
            rewards: RewardConfig::default(),
            prior: PriorConfig::default(),
            ppo: PPOConfig::default(),
            dr: DRConfig::default(),
            network: NetworkConfig::default(),
            obs_scale: ObsScale::default(),
            episode_steps: 400,
            divergence_threshold: 4.0 * std::f64::consts::PI,
            eval_steps: 400,
        }
    }

    pub fn n_joints(&self) -> usize {
        self.chain.n_joints
    }

    /// Whether the prior contributes at all for this variant.
    pub fn prior_active(&self) -> bool {
        self.prior.enabled && self.variant.prior_enabled
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        self.chain.validate()?;
        self.gains.validate(self.chain.n_joints)?;
        if self.gaits.is_empty() || self.train_gaits.is_empty() {
            return Err(ApexError::Config("at least one gait must be configured".into()));
        }
        for g in &self.gaits {
            g.validate(self.chain.n_joints)?;
        }
        if let Some(bad) = self.train_gaits.iter().find(|&&i| i >= self.gaits.len()) {
            return Err(ApexError::Config(format!("train gait index {bad} outside the library")));
        }
        self.rewards.validate()?;
        self.prior.validate()?;
        self.ppo.validate()?;
        self.dr.validate()?;
        if self.episode_steps == 0 || self.eval_steps == 0 {
            return Err(ApexError::Config("episode_steps and eval_steps must be positive".into()));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(ApexError::Config("divergence_threshold must be positive".into()));
        }
        if !(self.obs_scale.qdot.is_finite() && self.obs_scale.action.is_finite()) {
            return Err(ApexError::Config("observation scales must be finite".into()));
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON encoding.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn gait_duration(&self) -> f64 {
        self.episode_steps as f64 * self.chain.dt
    }
}
