//! Decaying action priors and multi-critic PPO on a planar torque-controlled
//! chain that tracks synthetic gait references.
//!
//! The executed torque is `u_t = a_t + c_t * beta_t`, where `a_t` is the
//! policy action, `beta_t = kp * (q_ref - q)` is a PD-style prior built from
//! the reference motion and `c_t = lambda^(t / k)` decays to zero over
//! training. Style and task rewards are learned by separate critics whose
//! advantages are standardized and summed.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod policy;
pub mod ppo;
pub mod priors;
pub mod reference;
pub mod rewards;
pub mod rng;

pub use dynamics::{ChainParams, ChainState, DRConfig, Interval, PDGains};
pub use error::{ApexError, Result};
pub use eval::{EvalReport, TrackingMetrics};
pub use policy::checkpoint::Checkpoint;
pub use policy::{CriticPair, GaussianPolicy, Mlp, NetworkConfig, Variant, VariantConfig};
pub use ppo::{CriticMode, MetricsRow, PPOConfig, RolloutBuffer, TrainConfig, TrainOutcome, Trainer};
pub use priors::{ClockMode, PriorConfig, TrainingClock};
pub use reference::{GaitSpec, MotionClip, RefSample, SkillSelector};
pub use rewards::{RewardConfig, RewardGroup, RewardGroups};
