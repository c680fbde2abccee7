use std::path::Path;

use apex::rewards::scale_config;
use apex::{CriticMode, RewardGroup, TrainConfig};

use crate::output::{ensure_dir, parallel_map};
use crate::summary::{final_q_rmse, median, trailing_mean, FINAL_WINDOW};
use crate::CliError;

/// Final metrics of one `(sigma, weight, critic mode, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub sigma_scale: f64,
    pub weight_scale: f64,
    pub critic_mode: CriticMode,
    pub seed: u64,
    pub q_rmse: f64,
    pub h_rmse: f64,
    pub x_ee_rmse: f64,
    pub v_rmse: f64,
    pub mean_reward: f64,
}

/// `base` with the style sensitivities multiplied by `sigma_scale` and the
/// task-group weights by `weight_scale`.
pub fn scaled_config(base: &TrainConfig, sigma_scale: f64, weight_scale: f64, mode: CriticMode) -> TrainConfig {
    let mut cfg = base.clone();
    let styled = scale_config(&base.rewards, sigma_scale, 1.0, RewardGroup::Style);
    cfg.rewards = scale_config(&styled, 1.0, weight_scale, RewardGroup::Task);
    cfg.ppo.critic_mode = mode;
    cfg
}

fn mode_name(m: CriticMode) -> &'static str {
    match m {
        CriticMode::Multi => "multi",
        CriticMode::Single => "single",
    }
}

/// Trains the full grid and writes `sweep.csv`, one row per cell and seed.
pub fn cmd_sweep(
    base: &TrainConfig,
    sigma_scales: &[f64],
    weight_scales: &[f64],
    modes: &[CriticMode],
    seeds: &[u64],
    threads: usize,
    out_dir: &Path,
) -> Result<Vec<SweepCell>, CliError> {
    if sigma_scales.iter().chain(weight_scales).any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(CliError::Usage("sweep multipliers must be positive".into()));
    }
    if sigma_scales.is_empty() || weight_scales.is_empty() || modes.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one multiplier, critic mode and seed".into()));
    }
    let mut jobs = Vec::new();
    for &s in sigma_scales {
        for &w in weight_scales {
            for &m in modes {
                for &seed in seeds {
                    jobs.push((s, w, m, seed));
                }
            }
        }
    }
    let results = parallel_map(&jobs, threads, |&(s, w, m, seed)| {
        let cfg = scaled_config(base, s, w, m);
        apex::ppo::train(&cfg, seed).map(|out| {
            let rows = &out.metrics;
            let tail = |f: fn(&apex::MetricsRow) -> f64| trailing_mean(rows, rows.len(), FINAL_WINDOW, f).unwrap_or(f64::NAN);
            SweepCell {
                sigma_scale: s,
                weight_scale: w,
                critic_mode: m,
                seed,
                q_rmse: final_q_rmse(rows).unwrap_or(f64::NAN),
                h_rmse: tail(|r| r.eval.h_rmse),
                x_ee_rmse: tail(|r| r.eval.x_ee_rmse),
                v_rmse: tail(|r| r.eval.v_rmse),
                mean_reward: tail(|r| r.eval.mean_reward),
            }
        })
    });
    let cells = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("sweep.csv"))?;
    w.write_record(["sigma_scale", "weight_scale", "critic_mode", "seed", "q_rmse", "h_rmse", "x_ee_rmse", "v_rmse", "mean_reward"])?;
    for c in &cells {
        w.write_record([
            c.sigma_scale.to_string(),
            c.weight_scale.to_string(),
            mode_name(c.critic_mode).to_string(),
            c.seed.to_string(),
            c.q_rmse.to_string(),
            c.h_rmse.to_string(),
            c.x_ee_rmse.to_string(),
            c.v_rmse.to_string(),
            c.mean_reward.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(cells)
}

/// Median over seeds of the relative joint-RMSE change from the unscaled
/// cell `(1, 1)` to `(sigma_scale, weight_scale)`, for one critic mode.
pub fn degradation(cells: &[SweepCell], mode: CriticMode, sigma_scale: f64, weight_scale: f64) -> Option<f64> {
    let pick = |s: f64, w: f64, seed: u64| {
        cells
            .iter()
            .find(|c| c.critic_mode == mode && c.sigma_scale == s && c.weight_scale == w && c.seed == seed)
            .map(|c| c.q_rmse)
    };
    let mut seeds: Vec<u64> = cells.iter().filter(|c| c.critic_mode == mode).map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let rel: Vec<f64> = seeds
        .iter()
        .filter_map(|&seed| Some((pick(sigma_scale, weight_scale, seed)? - pick(1.0, 1.0, seed)?) / pick(1.0, 1.0, seed)?))
        .collect();
    median(&rel)
}
