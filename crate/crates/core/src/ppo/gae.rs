//! Generalized advantage estimation and per-stream advantage combination.

use crate::error::{check_len, Result};

/// Advantages and returns for one trajectory segment.
///
/// `bootstrap` is the value estimate of the state following the last step.
/// A `done` at step `t` cuts both the bootstrap and the advantage recursion.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    dones: &[bool],
    gamma: f64,
    gae_lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    check_len("compute_gae::values", n, values.len())?;
    check_len("compute_gae::dones", n, dones.len())?;
    let mut advantages = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        let adv = delta + gamma * gae_lambda * not_done * next_adv;
        advantages[t] = adv;
        next_adv = adv;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// Relative standard-deviation floor below which a stream counts as constant.
pub const STD_GUARD: f64 = 1e-8;

/// Zero-mean, unit-variance copy of `x`. Streams whose standard deviation is
/// below `STD_GUARD` times their mean magnitude (or exactly zero) map to zeros.
pub fn standardize(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > STD_GUARD * mean.abs()) || std == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

/// Weighted sum of the standardized streams, emitted at single precision.
///
/// Rounding to `f32` absorbs the last-bit differences that floating-point
/// scaling introduces, so the result is bitwise identical when either stream
/// is multiplied by a positive constant.
pub fn combine_advantages(a_style: &[f64], a_task: &[f64], weights: (f64, f64)) -> Result<Vec<f64>> {
    check_len("combine_advantages", a_style.len(), a_task.len())?;
    let s = standardize(a_style);
    let t = standardize(a_task);
    Ok(s.iter()
        .zip(&t)
        .map(|(s, t)| (weights.0 * s + weights.1 * t) as f32 as f64)
        .collect())
}

/// Single-stream variant used by the single-critic ablation.
pub fn normalize_single(a: &[f64]) -> Vec<f64> {
    standardize(a).into_iter().map(|v| v as f32 as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Forward-indexed recursion written straight from the definition.
    fn oracle(r: &[f64], v: &[f64], boot: f64, d: &[bool], gamma: f64, lam: f64, t: usize) -> f64 {
        let not_done = if d[t] { 0.0 } else { 1.0 };
        let v_next = if t + 1 < r.len() { v[t + 1] } else { boot };
        let a_next = if t + 1 < r.len() { oracle(r, v, boot, d, gamma, lam, t + 1) } else { 0.0 };
        let delta = r[t] + gamma * v_next * not_done - v[t];
        delta + gamma * lam * not_done * a_next
    }

    #[test]
    fn single_step_example() {
        let (a, ret) = compute_gae(&[1.0], &[0.5], 0.2, &[false], 1.0, 1.0).unwrap();
        assert!((a[0] - 0.7).abs() < 1e-15);
        assert!((ret[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn done_masks_bootstrap() {
        for boot in [-3.0, 0.0, 10.0] {
            let (a, _) = compute_gae(&[0.3, 1.0], &[0.1, 0.5], boot, &[false, true], 0.9, 0.95).unwrap();
            assert_eq!(a[1], 1.0 - 0.5);
        }
    }

    #[test]
    fn zero_discount_is_one_step_residual() {
        let r = [1.0, -2.0, 0.5, 3.0];
        let v = [0.2, 0.1, -0.3, 0.7];
        let (a, _) = compute_gae(&r, &v, 5.0, &[false; 4], 0.0, 0.95).unwrap();
        for t in 0..4 {
            assert_eq!(a[t], r[t] - v[t]);
        }
    }

    #[test]
    fn matches_hand_recursion_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let r: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d: Vec<bool> = (0..10).map(|_| rng.random_bool(0.2)).collect();
            let boot = rng.random_range(-1.0..1.0);
            let (a, ret) = compute_gae(&r, &v, boot, &d, 0.99, 0.95).unwrap();
            for t in 0..10 {
                assert_eq!(a[t], oracle(&r, &v, boot, &d, 0.99, 0.95, t));
                assert_eq!(ret[t], a[t] + v[t]);
            }
        }
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine_advantages(&[1.0, -1.0], &[1.0, -1.0], (1.0, 1.0)).unwrap(), vec![2.0, -2.0]);
        let c = combine_advantages(&[0.7; 5], &[1.0, -1.0, 1.0, -1.0, 0.0], (1.0, 1.0)).unwrap();
        let t = normalize_single(&[1.0, -1.0, 1.0, -1.0, 0.0]);
        assert_eq!(c, t);
        assert_eq!(standardize(&[0.1, 0.1, 0.1]), vec![0.0; 3]);
        assert!(combine_advantages(&[1.0], &[1.0, 2.0], (1.0, 1.0)).is_err());
    }

    #[test]
    fn combine_is_bitwise_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..2000).map(|_| rng.random_range(-3.0..5.0)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random_range(-40.0..10.0)).collect();
        let base = combine_advantages(&a, &b, (1.0, 1.0)).unwrap();
        for c in [1e-3, 0.37, 2.0, 10.0, 30.0, 1234.5, 1e6] {
            let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
            assert_eq!(combine_advantages(&sa, &b, (1.0, 1.0)).unwrap(), base, "style x{c}");
            assert_eq!(combine_advantages(&a, &sb, (1.0, 1.0)).unwrap(), base, "task x{c}");
        }
    }

    proptest! {
        #[test]
        fn standardized_stream_has_unit_moments(x in prop::collection::vec(-100.0f64..100.0, 2..200)) {
            let z = standardize(&x);
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if z.iter().any(|v| *v != 0.0) {
                let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn gae_returns_equal_advantage_plus_value(
            steps in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..40),
            boot in -5.0f64..5.0,
        ) {
            let r: Vec<f64> = steps.iter().map(|s| s.0).collect();
            let v: Vec<f64> = steps.iter().map(|s| s.1).collect();
            let d: Vec<bool> = steps.iter().map(|s| s.2).collect();
            let (a, ret) = compute_gae(&r, &v, boot, &d, 0.99, 0.95).unwrap();
            for t in 0..r.len() {
                prop_assert_eq!(ret[t], a[t] + v[t]);
            }
        }
    }
}
