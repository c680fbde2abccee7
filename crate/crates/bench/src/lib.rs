//! Fixtures shared by the benchmarks.

use apex::policy::obs::{actor_obs_dim, critic_obs_dim};
use apex::ppo::ChainEnv;
use apex::rng::seeded;
use apex::{CriticPair, GaussianPolicy, TrainConfig, Variant};
use ndarray::Array2;

/// Default APEX configuration with `n_envs` environments.
pub fn config(n_envs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(Variant::Apex);
    cfg.ppo.n_envs = n_envs;
    cfg
}

pub fn networks(cfg: &TrainConfig) -> (GaussianPolicy, CriticPair) {
    let n = cfg.n_joints();
    let mut rng = seeded(0, 0);
    let policy = GaussianPolicy::new(actor_obs_dim(n, &cfg.variant), n, &cfg.network, &mut rng).expect("valid network config");
    let critics = CriticPair::new(critic_obs_dim(n, &cfg.variant), &cfg.network, &mut rng).expect("valid network config");
    (policy, critics)
}

pub fn envs(cfg: &TrainConfig) -> Vec<ChainEnv> {
    (0..cfg.ppo.n_envs)
        .map(|e| ChainEnv::new(cfg, seeded(0, e as u64 + 1)).expect("valid env config"))
        .collect()
}

/// Deterministic pseudo-random batch with entries in `[-1, 1]`.
pub fn batch(rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| ((i * 31 + j * 17) % 97) as f64 / 48.5 - 1.0)
}
