use std::path::Path;

use apex::analysis::{extract_phase_pattern, nearest_gait, PhasePattern};
use apex::eval::deterministic_rollout;
use apex::reference::GAIT_GROUPS;
use apex::Checkpoint;

use crate::output::ensure_dir;
use crate::CliError;

/// Leading control steps dropped before phase extraction.
pub const SETTLE_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorPattern {
    pub selector: (usize, usize),
    pub pattern: PhasePattern,
    /// Library gait with the closest offset pattern, if the phases are defined.
    pub nearest: Option<usize>,
    pub diverged: bool,
}

impl SelectorPattern {
    pub fn correct(&self) -> bool {
        self.nearest == Some(self.selector.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitDiagram {
    pub rows: Vec<SelectorPattern>,
}

impl GaitDiagram {
    pub fn correct(&self) -> usize {
        self.rows.iter().filter(|r| r.correct()).count()
    }
}

/// Rolls out each selector with the prior off and recovers the per-group
/// phase offsets of the resulting motion.
pub fn gait_diagram(ck: &Checkpoint, selectors: &[(usize, usize)], steps: usize) -> Result<GaitDiagram, CliError> {
    let lib = &ck.config.gaits;
    let mut rows = Vec::with_capacity(selectors.len());
    for &(m, n) in selectors {
        if n != lib.len() || m >= n {
            return Err(CliError::Usage(format!("selector {m}/{n} does not fit the checkpoint's {}-gait library", lib.len())));
        }
        let traj = deterministic_rollout(&ck.policy, &ck.config, m, 0.0, steps)?;
        let q: Vec<Vec<f64>> = traj.states.iter().skip(SETTLE_STEPS).map(|s| s.q.clone()).collect();
        let pattern = extract_phase_pattern(&q, ck.config.chain.dt);
        let nearest = nearest_gait(&pattern, lib);
        rows.push(SelectorPattern {
            selector: (m, n),
            pattern,
            nearest,
            diverged: traj.diverged,
        });
    }
    Ok(GaitDiagram { rows })
}

/// [`gait_diagram`] for a checkpoint file, writing `gait_diagram.csv` with
/// one row per selector and joint group.
pub fn cmd_gait_diagram(checkpoint: &Path, selectors: &[(usize, usize)], out_dir: &Path) -> Result<GaitDiagram, CliError> {
    let ck = Checkpoint::load(checkpoint)?;
    if selectors.is_empty() {
        return Err(CliError::Usage("at least one selector is required".into()));
    }
    let diagram = gait_diagram(&ck, selectors, ck.config.eval_steps + SETTLE_STEPS)?;
    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("gait_diagram.csv"))?;
    w.write_record(["selector", "commanded", "group", "offset", "frequency", "nearest", "diverged"])?;
    let lib = &ck.config.gaits;
    let undefined = || "undefined".to_string();
    for r in &diagram.rows {
        for g in 0..GAIT_GROUPS {
            w.write_record([
                format!("{}/{}", r.selector.0, r.selector.1),
                lib[r.selector.0].name.clone(),
                g.to_string(),
                r.pattern.offsets[g].map_or_else(undefined, |o| o.to_string()),
                r.pattern.frequency.map_or_else(undefined, |f| f.to_string()),
                r.nearest.map_or_else(undefined, |i| lib[i].name.clone()),
                r.diverged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(diagram)
}
