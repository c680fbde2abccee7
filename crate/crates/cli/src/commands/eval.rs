use std::path::Path;

use apex::eval::evaluate;
use apex::{Checkpoint, EvalReport};

use crate::output::ensure_dir;
use crate::CliError;

/// Which gait of the checkpoint's library to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum GaitChoice {
    Name(String),
    /// `(m, n)`: gait `m` of a library the caller expects to hold `n`.
    Selector(usize, usize),
}

impl GaitChoice {
    pub fn resolve(&self, ck: &Checkpoint) -> Result<usize, CliError> {
        let lib = &ck.config.gaits;
        match self {
            GaitChoice::Name(name) => lib
                .iter()
                .position(|g| g.name.eq_ignore_ascii_case(name))
                .ok_or_else(|| CliError::Usage(format!("gait {name:?} is not in the checkpoint's library"))),
            GaitChoice::Selector(m, n) => {
                if *n != lib.len() {
                    return Err(CliError::Usage(format!(
                        "selector {m}/{n} does not fit the checkpoint's {}-gait library",
                        lib.len()
                    )));
                }
                Ok(*m)
            }
        }
    }
}

/// Deterministic evaluation of a checkpoint with the prior off. Writes
/// `eval.csv` under `out_dir`.
pub fn cmd_eval(checkpoint: &Path, gait: &GaitChoice, episodes: usize, out_dir: &Path) -> Result<EvalReport, CliError> {
    if episodes == 0 {
        return Err(CliError::Usage("episodes must be positive".into()));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let g = gait.resolve(&ck)?;
    let report = evaluate(&ck.policy, &ck.config, g, episodes, ck.config.eval_steps)?;
    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("eval.csv"))?;
    w.write_record([
        "gait",
        "episodes",
        "steps",
        "q_rmse",
        "h_rmse",
        "x_ee_rmse",
        "v_rmse",
        "mean_reward",
        "diverged_episodes",
    ])?;
    w.write_record([
        ck.config.gaits[g].name.clone(),
        episodes.to_string(),
        report.steps.to_string(),
        report.q_rmse.to_string(),
        report.h_rmse.to_string(),
        report.x_ee_rmse.to_string(),
        report.v_rmse.to_string(),
        report.mean_reward.to_string(),
        report.diverged_episodes.to_string(),
    ])?;
    w.flush()?;
    Ok(report)
}
