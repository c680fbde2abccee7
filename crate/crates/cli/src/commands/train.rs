use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use apex::ppo::train::train_with;
use apex::{Checkpoint, TrainConfig, TrainOutcome};

use crate::output::{checkpoint_path, ensure_dir, metrics_path, parallel_map, write_manifest};
use crate::{CliError, RunConfig};

#[derive(Debug, Clone)]
pub struct TrainedSeed {
    pub seed: u64,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub outcome: TrainOutcome,
}

/// Trains one run per seed without touching the filesystem.
pub fn train_seeds(config: &TrainConfig, seeds: &[u64], threads: usize) -> Result<Vec<TrainOutcome>, CliError> {
    parallel_map(seeds, threads, |&seed| train_with(config, seed, |_| {}))
        .into_iter()
        .map(|r| r.map_err(CliError::from))
        .collect()
}

/// Trains every seed and writes, under the output directory, one metrics
/// CSV and one checkpoint per seed plus a single manifest.
pub fn cmd_train(rc: &RunConfig, threads: usize) -> Result<Vec<TrainedSeed>, CliError> {
    ensure_dir(&rc.out_dir)?;
    let outcomes = train_seeds(&rc.train, &rc.seeds, threads)?;
    let mut out = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let seed = outcome.seed;
        let mp = metrics_path(&rc.out_dir, seed);
        outcome.write_metrics_csv(BufWriter::new(File::create(&mp)?))?;
        let cp = checkpoint_path(&rc.out_dir, seed);
        Checkpoint {
            config: outcome.config.clone(),
            seed,
            clock: outcome.clock,
            policy: outcome.policy.clone(),
            critics: outcome.critics.clone(),
        }
        .save(&cp)?;
        out.push(TrainedSeed {
            seed,
            metrics_path: mp,
            checkpoint_path: cp,
            outcome,
        });
    }
    write_manifest(&rc.out_dir, "train", rc)?;
    Ok(out)
}
