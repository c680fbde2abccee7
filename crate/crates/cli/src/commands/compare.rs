use std::path::Path;

use apex::{MetricsRow, TrainConfig};

use crate::commands::train::train_seeds;
use crate::output::ensure_dir;
use crate::CliError;

/// Metrics emitted per iteration, in column order of the long format.
pub const COMPARE_METRICS: [&str; 9] = [
    "decay",
    "mean_style_reward",
    "mean_task_reward",
    "mean_total_reward",
    "eval_q_rmse",
    "eval_h_rmse",
    "eval_x_ee_rmse",
    "eval_v_rmse",
    "eval_mean_reward",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub variant: String,
    pub seed: u64,
    pub iteration: usize,
    pub metric: &'static str,
    pub value: f64,
}

fn metric_values(r: &MetricsRow) -> [f64; 9] {
    [
        r.decay,
        r.mean_style,
        r.mean_task,
        r.mean_total(),
        r.eval.q_rmse,
        r.eval.h_rmse,
        r.eval.x_ee_rmse,
        r.eval.v_rmse,
        r.eval.mean_reward,
    ]
}

/// Trains every configuration on the same seeds and writes `compare.csv`
/// in long format `(variant, seed, iteration, metric, value)`.
pub fn cmd_compare(configs: &[TrainConfig], seeds: &[u64], threads: usize, out_dir: &Path) -> Result<Vec<CompareRow>, CliError> {
    if configs.len() < 2 {
        return Err(CliError::Usage("compare needs at least two configurations".into()));
    }
    let n = configs[0].n_joints();
    if let Some(c) = configs.iter().find(|c| c.n_joints() != n) {
        return Err(CliError::Config(format!(
            "all compared configurations need the same joint count, got {n} and {}",
            c.n_joints()
        )));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("compare needs at least one seed".into()));
    }
    let mut rows = Vec::new();
    for cfg in configs {
        for outcome in train_seeds(cfg, seeds, threads)? {
            for m in &outcome.metrics {
                for (metric, value) in COMPARE_METRICS.iter().zip(metric_values(m)) {
                    rows.push(CompareRow {
                        variant: cfg.variant.name.name().to_string(),
                        seed: outcome.seed,
                        iteration: m.iteration,
                        metric,
                        value,
                    });
                }
            }
        }
    }
    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("compare.csv"))?;
    w.write_record(["variant", "seed", "iteration", "metric", "value"])?;
    for r in &rows {
        w.write_record([r.variant.clone(), r.seed.to_string(), r.iteration.to_string(), r.metric.to_string(), r.value.to_string()])?;
    }
    w.flush()?;
    Ok(rows)
}
