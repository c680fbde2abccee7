use std::path::Path;

use apex::gradcheck::{unbiasedness_grid, variance_report, Baseline, LQToy, UnbiasednessCell, VarianceRow};
use apex::rng::seeded;

use crate::output::ensure_dir;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub goal: f64,
    pub sigma: f64,
    pub thetas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid_samples: usize,
    /// Toy for the variance table; its `prior_coeff` is ignored.
    pub variance_toy: LQToy,
    pub variance_coeffs: Vec<f64>,
    pub variance_samples: usize,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            goal: 1.0,
            sigma: 1.0,
            thetas: vec![-1.0, 0.0, 1.0],
            coeffs: vec![0.0, 0.5, 1.0],
            betas: vec![-1.0, 0.5, 2.0],
            grid_samples: 100_000,
            variance_toy: LQToy {
                goal: 1.0,
                beta: 1.0,
                prior_coeff: 0.0,
                theta: 0.0,
                sigma: 1.0,
            },
            variance_coeffs: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            variance_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub grid: Vec<UnbiasednessCell>,
    pub variance: Vec<VarianceRow>,
}

impl GradcheckReport {
    /// Grid cells whose estimate lies within `k` standard errors.
    pub fn cells_within(&self, k: f64) -> usize {
        self.grid.iter().filter(|c| c.within(k)).count()
    }

    pub fn variance_at(&self, c: f64) -> Option<f64> {
        self.variance.iter().find(|r| r.prior_coeff == c).map(|r| r.variance)
    }
}

/// Runs the unbiasedness grid and the common-random-number variance table,
/// writing `gradcheck_grid.csv` and `gradcheck_variance.csv`.
pub fn cmd_gradcheck(opts: &GradcheckOptions, out_dir: &Path) -> Result<GradcheckReport, CliError> {
    let grid = unbiasedness_grid(
        opts.goal,
        opts.sigma,
        &opts.thetas,
        &opts.coeffs,
        &opts.betas,
        opts.grid_samples,
        &mut seeded(opts.seed, 0),
    )?;
    let variance = variance_report(
        &opts.variance_toy,
        opts.variance_samples,
        &opts.variance_coeffs,
        Baseline::None,
        &mut seeded(opts.seed, 1),
    )?;
    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("gradcheck_grid.csv"))?;
    w.write_record(["theta", "prior_coeff", "beta", "goal", "sigma", "samples", "estimate", "std_error", "closed_form", "z_score"])?;
    for c in &grid {
        w.write_record([
            c.toy.theta.to_string(),
            c.toy.prior_coeff.to_string(),
            c.toy.beta.to_string(),
            c.toy.goal.to_string(),
            c.toy.sigma.to_string(),
            opts.grid_samples.to_string(),
            c.estimate.mean.to_string(),
            c.estimate.std_error.to_string(),
            c.closed_form.to_string(),
            c.z_score.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out_dir.join("gradcheck_variance.csv"))?;
    w.write_record(["prior_coeff", "samples", "mean", "variance", "closed_form"])?;
    for r in &variance {
        w.write_record([
            r.prior_coeff.to_string(),
            opts.variance_samples.to_string(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.closed_form.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(GradcheckReport { grid, variance })
}
