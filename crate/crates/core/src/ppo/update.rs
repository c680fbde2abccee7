//! Clipped-surrogate actor update and per-critic value regression.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::buffer::{RolloutBuffer, Targets};
use super::{CriticMode, PPOConfig};
use crate::error::{check_len, ApexError, Result};
use crate::policy::mlp::clip_grad_norm;
use crate::policy::{gaussian_log_prob, Adam, CriticPair, GaussianPolicy, Mlp};

/// Optimizer state for the actor and both critics.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoLearner {
    actor: Adam,
    style: Adam,
    task: Adam,
}

impl PpoLearner {
    pub fn new(policy: &GaussianPolicy, critics: &CriticPair, lr: f64) -> Self {
        Self {
            actor: Adam::new(policy.mean_net.num_params() + policy.log_std.len(), lr),
            style: Adam::new(critics.v_style.num_params(), lr),
            task: Adam::new(critics.v_task.num_params(), lr),
        }
    }
}

/// Averages over all minibatch steps of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss_style: f64,
    pub value_loss_task: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// Clip fraction of the very first minibatch, taken before any step.
    pub first_clip_fraction: f64,
}

/// Per-sample PPO objective `min(r A, clip(r, 1-eps, 1+eps) A)` and whether
/// the unclipped branch is the active one (gradient flows through `r`).
pub fn clipped_objective(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Probability ratios of the stored actions under the current policy.
pub fn ratios(policy: &GaussianPolicy, obs: &Array2<f64>, actions: &Array2<f64>, old_log_probs: &[f64]) -> Result<Vec<f64>> {
    let means = policy.mean_net.forward(obs.view())?;
    Ok((0..obs.nrows())
        .map(|i| {
            let lp = gaussian_log_prob(&means.row(i).to_vec(), &policy.log_std, &actions.row(i).to_vec());
            (lp - old_log_probs[i]).exp()
        })
        .collect())
}

/// Surrogate loss of one minibatch and its gradient with respect to the
/// flat actor parameters (mean network, then `log_std`).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

pub fn surrogate_grad(
    policy: &GaussianPolicy,
    obs: &Array2<f64>,
    actions: &Array2<f64>,
    old_lp: &[f64],
    adv: &[f64],
    cfg: &PPOConfig,
) -> Result<SurrogateGrad> {
    let b = obs.nrows();
    check_len("surrogate::old_log_probs", b, old_lp.len())?;
    check_len("surrogate::advantages", b, adv.len())?;
    let cache = policy.mean_net.forward_cached(obs.view())?;
    let means = cache.output();
    let n = policy.act_dim();
    let inv_var: Vec<f64> = policy.log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let mut d_mean = Array2::zeros((b, n));
    let mut d_log_std = vec![-cfg.entropy_coef; n];
    let (mut loss, mut clipped, mut kl) = (0.0, 0usize, 0.0);
    for i in 0..b {
        let mean = means.row(i);
        let act = actions.row(i);
        let lp = gaussian_log_prob(&mean.to_vec(), &policy.log_std, &act.to_vec());
        let log_ratio = lp - old_lp[i];
        let ratio = log_ratio.exp();
        let (obj, active) = clipped_objective(ratio, adv[i], cfg.clip_eps);
        loss -= obj / b as f64;
        clipped += ((ratio - 1.0).abs() > cfg.clip_eps) as usize;
        kl += (ratio - 1.0) - log_ratio;
        if active {
            // d(-r A / B) / d log_prob
            let g = -ratio * adv[i] / b as f64;
            for j in 0..n {
                let diff = act[j] - mean[j];
                d_mean[[i, j]] = g * diff * inv_var[j];
                d_log_std[j] += g * (diff * diff * inv_var[j] - 1.0);
            }
        }
    }
    loss -= cfg.entropy_coef * policy.entropy();
    let mut grad = policy.mean_net.backward(&cache, &d_mean)?.flatten();
    grad.extend_from_slice(&d_log_std);
    Ok(SurrogateGrad {
        loss,
        grad,
        clip_fraction: clipped as f64 / b as f64,
        approx_kl: kl / b as f64,
    })
}

fn actor_step(
    policy: &mut GaussianPolicy,
    adam: &mut Adam,
    obs: &Array2<f64>,
    actions: &Array2<f64>,
    old_lp: &[f64],
    adv: &[f64],
    cfg: &PPOConfig,
) -> Result<SurrogateGrad> {
    let mut sg = surrogate_grad(policy, obs, actions, old_lp, adv, cfg)?;
    clip_grad_norm(&mut sg.grad, cfg.max_grad_norm);
    let mut params = policy.mean_net.flatten();
    params.extend_from_slice(&policy.log_std);
    adam.step(&mut params, &sg.grad);
    let split = policy.mean_net.num_params();
    policy.mean_net.set_flat(&params[..split])?;
    policy.log_std.copy_from_slice(&params[split..]);
    policy.clamp_log_std();
    Ok(sg)
}

/// One Adam step on `0.5`-free mean squared error `mean((V(x) - y)^2)`.
/// Returns the loss before the step.
pub fn critic_step(net: &mut Mlp, adam: &mut Adam, obs: &Array2<f64>, returns: &[f64], max_grad_norm: f64) -> Result<f64> {
    check_len("critic_step::returns", obs.nrows(), returns.len())?;
    let b = obs.nrows() as f64;
    let cache = net.forward_cached(obs.view())?;
    let v = cache.output();
    let mut d_out = Array2::zeros((obs.nrows(), 1));
    let mut loss = 0.0;
    for i in 0..obs.nrows() {
        let e = v[[i, 0]] - returns[i];
        loss += e * e / b;
        d_out[[i, 0]] = 2.0 * e / b;
    }
    let mut grad = net.backward(&cache, &d_out)?.flatten();
    clip_grad_norm(&mut grad, max_grad_norm);
    let mut params = net.flatten();
    adam.step(&mut params, &grad);
    net.set_flat(&params)?;
    Ok(loss)
}

fn pick(xs: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| xs[i]).collect()
}

/// Critics regress returns divided by `value_scale`.
fn scaled_pick(xs: &[f64], idx: &[usize], scale: f64) -> Vec<f64> {
    idx.iter().map(|&i| xs[i] / scale).collect()
}

/// Runs `epochs` passes of shuffled minibatch updates over the buffer.
///
/// Log densities are always evaluated at the stored policy actions `a_t`.
/// On a non-finite loss or parameter the networks and optimizer state are
/// restored to their values on entry and an error is returned.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    critics: &mut CriticPair,
    learner: &mut PpoLearner,
    buffer: &RolloutBuffer,
    targets: &Targets,
    cfg: &PPOConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let snapshot = (policy.clone(), critics.clone(), learner.clone());
    let result = run_update(policy, critics, learner, buffer, targets, cfg, rng);
    let healthy = matches!(&result, Ok(s) if [s.policy_loss, s.value_loss_style, s.value_loss_task, s.approx_kl].iter().all(|x| x.is_finite()))
        && policy.is_finite()
        && critics.is_finite();
    if healthy {
        return result;
    }
    (*policy, *critics, *learner) = snapshot;
    match result {
        Err(e) => Err(e),
        Ok(s) => Err(ApexError::Numeric(format!(
            "non-finite update (policy loss {}, value losses {} / {}, approx kl {}); parameters rolled back",
            s.policy_loss, s.value_loss_style, s.value_loss_task, s.approx_kl
        ))),
    }
}

fn run_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    critics: &mut CriticPair,
    learner: &mut PpoLearner,
    buffer: &RolloutBuffer,
    targets: &Targets,
    cfg: &PPOConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let n = buffer.len();
    check_len("ppo_update::advantages", n, targets.advantages.len())?;
    let mb = n / cfg.minibatches;
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for k in 0..cfg.minibatches {
            let idx = &order[k * mb..(k + 1) * mb];
            let obs = buffer.actor_obs.select(Axis(0), idx);
            let acts = buffer.actions.select(Axis(0), idx);
            let cobs = buffer.critic_obs.select(Axis(0), idx);
            let a = actor_step(
                policy,
                &mut learner.actor,
                &obs,
                &acts,
                &pick(&buffer.log_probs, idx),
                &pick(&targets.advantages, idx),
                cfg,
            )?;
            if epoch == 0 && k == 0 {
                stats.first_clip_fraction = a.clip_fraction;
            }
            let lt = critic_step(&mut critics.v_task, &mut learner.task, &cobs, &scaled_pick(&targets.returns_task, idx, cfg.value_scale), cfg.max_grad_norm)?;
            let ls = match cfg.critic_mode {
                CriticMode::Multi => critic_step(
                    &mut critics.v_style,
                    &mut learner.style,
                    &cobs,
                    &scaled_pick(&targets.returns_style, idx, cfg.value_scale),
                    cfg.max_grad_norm,
                )?,
                CriticMode::Single => 0.0,
            };
            stats.policy_loss += a.loss;
            stats.clip_fraction += a.clip_fraction;
            stats.approx_kl += a.approx_kl;
            stats.value_loss_task += lt;
            stats.value_loss_style += ls;
            steps += 1;
        }
    }
    let s = steps.max(1) as f64;
    stats.policy_loss /= s;
    stats.clip_fraction /= s;
    stats.approx_kl /= s;
    stats.value_loss_task /= s;
    stats.value_loss_style /= s;
    stats.entropy = policy.entropy();
    Ok(stats)
}
