//! Score-function gradients through a blended action on a one-step
//! linear-quadratic problem with a closed-form objective.
//!
//! The policy samples `a ~ N(theta, sigma^2)`, the plant receives
//! `u = a + c * beta` and pays `r(u) = -(u - g)^2`. Then
//! `J(theta) = -((theta + c beta - g)^2 + sigma^2)`, and the likelihood
//! ratio estimator `d/dtheta log N(a; theta, sigma^2) * (r(u) - b)` is
//! unbiased for `dJ/dtheta` because `c` and `beta` do not depend on `theta`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ApexError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LQToy {
    pub goal: f64,
    pub beta: f64,
    pub prior_coeff: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl LQToy {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(ApexError::Config(format!("policy std must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Expected reward `J(theta)`.
    pub fn objective(&self) -> f64 {
        let m = self.theta + self.prior_coeff * self.beta - self.goal;
        -(m * m + self.sigma * self.sigma)
    }

    pub fn reward(&self, action: f64) -> f64 {
        let u = action + self.prior_coeff * self.beta;
        -(u - self.goal) * (u - self.goal)
    }

    /// Single-sample estimate for the standard-normal draw `z`.
    pub fn sample_gradient(&self, z: f64, baseline: f64) -> f64 {
        let a = self.theta + self.sigma * z;
        let score = (a - self.theta) / (self.sigma * self.sigma);
        score * (self.reward(a) - baseline)
    }
}

/// `dJ/dtheta = -2 (theta + c beta - g)`.
pub fn closed_form_grad(toy: &LQToy) -> f64 {
    -2.0 * (toy.theta + toy.prior_coeff * toy.beta - toy.goal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    None,
    /// The exact expected reward `J(theta)`.
    Value,
    Constant(f64),
}

impl Baseline {
    fn value(&self, toy: &LQToy) -> f64 {
        match self {
            Baseline::None => 0.0,
            Baseline::Value => toy.objective(),
            Baseline::Constant(b) => *b,
        }
    }
}

/// Sample mean and unbiased sample variance.
fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    // Welford
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Per-sample variance.
    pub variance: f64,
}

/// Monte Carlo likelihood-ratio estimate over `n` draws.
pub fn mc_policy_gradient<R: Rng + ?Sized>(toy: &LQToy, n: usize, baseline: Baseline, rng: &mut R) -> Result<GradientEstimate> {
    toy.validate()?;
    if n == 0 {
        return Err(ApexError::Config("need at least one sample".into()));
    }
    let b = baseline.value(toy);
    let (mean, variance, n) = moments((0..n).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        toy.sample_gradient(z, b)
    }));
    Ok(GradientEstimate {
        mean,
        std_error: (variance / n as f64).sqrt(),
        variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub prior_coeff: f64,
    pub mean: f64,
    pub variance: f64,
    pub closed_form: f64,
}

/// Per-sample estimator variance for each prior coefficient in `coeffs`,
/// all evaluated on one shared set of `n` normal draws.
pub fn variance_report<R: Rng + ?Sized>(
    toy: &LQToy,
    n: usize,
    coeffs: &[f64],
    baseline: Baseline,
    rng: &mut R,
) -> Result<Vec<VarianceRow>> {
    toy.validate()?;
    if n < 1000 {
        return Err(ApexError::Config(format!("variance report needs at least 1000 samples, got {n}")));
    }
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Ok(coeffs
        .iter()
        .map(|&c| {
            let t = LQToy { prior_coeff: c, ..*toy };
            let b = baseline.value(&t);
            let (mean, variance, _) = moments(z.iter().map(|z| t.sample_gradient(*z, b)));
            VarianceRow {
                prior_coeff: c,
                mean,
                variance,
                closed_form: closed_form_grad(&t),
            }
        })
        .collect())
}

/// One cell of the unbiasedness grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessCell {
    pub toy: LQToy,
    pub estimate: GradientEstimate,
    pub closed_form: f64,
    /// `|estimate - closed_form| / std_error`.
    pub z_score: f64,
}

impl UnbiasednessCell {
    pub fn within(&self, k: f64) -> bool {
        self.z_score < k
    }
}

/// Every `(theta, c, beta)` combination, one independent estimate each.
pub fn unbiasedness_grid<R: Rng + ?Sized>(
    goal: f64,
    sigma: f64,
    thetas: &[f64],
    coeffs: &[f64],
    betas: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<UnbiasednessCell>> {
    let mut out = Vec::with_capacity(thetas.len() * coeffs.len() * betas.len());
    for &theta in thetas {
        for &prior_coeff in coeffs {
            for &beta in betas {
                let toy = LQToy {
                    goal,
                    beta,
                    prior_coeff,
                    theta,
                    sigma,
                };
                let estimate = mc_policy_gradient(&toy, n, Baseline::None, rng)?;
                let closed_form = closed_form_grad(&toy);
                out.push(UnbiasednessCell {
                    toy,
                    estimate,
                    closed_form,
                    z_score: (estimate.mean - closed_form).abs() / estimate.std_error,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn toy(theta: f64, c: f64, beta: f64, goal: f64) -> LQToy {
        LQToy {
            goal,
            beta,
            prior_coeff: c,
            theta,
            sigma: 1.0,
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_grad(&toy(0.0, 1.0, 0.5, 1.0)), 1.0);
        assert_eq!(closed_form_grad(&toy(1.0, 0.0, 3.0, 1.0)), 0.0);
        assert_eq!(closed_form_grad(&toy(0.0, 0.0, 3.0, 1.0)), 2.0);
    }

    #[test]
    fn closed_form_matches_finite_difference_of_objective() {
        let t = toy(0.3, 0.7, -0.4, 1.2);
        let h = 1e-6;
        let fd = (LQToy { theta: t.theta + h, ..t }.objective() - LQToy { theta: t.theta - h, ..t }.objective()) / (2.0 * h);
        assert!((fd - closed_form_grad(&t)).abs() < 1e-8);
    }

    #[test]
    fn estimate_is_unbiased() {
        let t = toy(0.0, 1.0, 0.5, 1.0);
        let e = mc_policy_gradient(&t, 100_000, Baseline::None, &mut seeded(7, 0)).unwrap();
        assert!((e.mean - 1.0).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn zero_prior_is_plain_reinforce() {
        let blended = toy(0.2, 1.0, 0.0, 1.0);
        let plain = toy(0.2, 0.0, 0.0, 1.0);
        let a = mc_policy_gradient(&blended, 1000, Baseline::None, &mut seeded(8, 0)).unwrap();
        let b = mc_policy_gradient(&plain, 1000, Baseline::None, &mut seeded(8, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baselines_keep_the_mean() {
        let t = toy(-0.5, 0.5, 1.0, 1.0);
        let none = mc_policy_gradient(&t, 100_000, Baseline::None, &mut seeded(9, 0)).unwrap();
        for b in [Baseline::Value, Baseline::Constant(-3.0), Baseline::Constant(5.0)] {
            let with = mc_policy_gradient(&t, 100_000, b, &mut seeded(9, 1)).unwrap();
            let se = (none.std_error.powi(2) + with.std_error.powi(2)).sqrt();
            assert!((none.mean - with.mean).abs() < 4.0 * se, "{b:?}");
        }
    }

    #[test]
    fn variance_report_properties() {
        let rows = variance_report(&toy(0.0, 0.0, 0.0, 1.0), 5000, &[0.0, 0.5, 1.0], Baseline::None, &mut seeded(10, 0)).unwrap();
        assert!(rows.iter().all(|r| r.variance > 0.0));
        // beta = 0 makes c irrelevant
        assert!(rows.iter().all(|r| r.variance == rows[0].variance));
        assert!(variance_report(&toy(0.0, 0.0, 0.0, 1.0), 10, &[0.0], Baseline::None, &mut seeded(10, 0)).is_err());
    }

    #[test]
    fn variance_matches_normal_moments() {
        // c = 1: sample = -z^3, variance E[z^6] = 15. c = 0: variance 30.
        let rows = variance_report(&toy(0.0, 0.0, 1.0, 1.0), 400_000, &[0.0, 1.0], Baseline::None, &mut seeded(11, 0)).unwrap();
        assert!((rows[0].variance - 30.0).abs() / 30.0 < 0.1, "{}", rows[0].variance);
        assert!((rows[1].variance - 15.0).abs() / 15.0 < 0.1, "{}", rows[1].variance);
    }
}
