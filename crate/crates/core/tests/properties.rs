use apex::dynamics::{clamp_torque, forward_kinematics, mechanical_energy, randomize, step};
use apex::ppo::gae::standardize;
use apex::ppo::{combine_advantages, compute_gae};
use apex::priors::{blend, decay_coeff, prior_torque};
use apex::reference::{calibrated_gait_library, sample_reference, selector_value};
use apex::rewards::{style_reward, task_reward, tracking_kernel};
use apex::rng::seeded;
use apex::{ChainParams, ChainState, DRConfig, PDGains, PriorConfig, RewardConfig, TrainingClock};
use proptest::prelude::*;

fn angles(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn state8() -> impl Strategy<Value = ChainState> {
    (angles(8), prop::collection::vec(-5.0f64..5.0, 8)).prop_map(|(q, v)| ChainState::new(q, v).unwrap())
}

// Direct sum over the remaining trajectory, cut at the first done.
fn gae_oracle(r: &[f64], v: &[f64], boot: f64, d: &[bool], gamma: f64, lam: f64, t: usize) -> f64 {
    let mut total = 0.0;
    let mut w = 1.0;
    for k in t..r.len() {
        let next = if d[k] {
            0.0
        } else if k + 1 < r.len() {
            v[k + 1]
        } else {
            boot
        };
        total += w * (r[k] + gamma * next - v[k]);
        if d[k] {
            break;
        }
        w *= gamma * lam;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_deterministic(s in state8(), tau in prop::collection::vec(-20.0f64..20.0, 8)) {
        let p = ChainParams::uniform(8);
        let a = step(&s, &tau, &p);
        let b = step(&s, &tau, &p);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn oversized_torque_acts_like_the_limit(s in state8(), tau in prop::collection::vec(-50.0f64..50.0, 8)) {
        let p = ChainParams::uniform(8);
        let clamped = clamp_torque(&tau, p.torque_limit);
        prop_assert!(clamped.iter().all(|t| t.abs() <= p.torque_limit));
        prop_assert_eq!(step(&s, &tau, &p).ok(), step(&s, &clamped, &p).ok());
    }

    #[test]
    fn tip_stays_within_reach(q in angles(8)) {
        let p = ChainParams::uniform(8);
        let (x, z) = forward_kinematics(&q, &p).unwrap();
        prop_assert!((x * x + z * z).sqrt() <= p.total_length() + 1e-12);
    }

    #[test]
    fn unforced_pendulum_never_gains_energy(q in -2.5f64..2.5, v in -4.0f64..4.0) {
        let mut p = ChainParams::uniform(1);
        p.dt = 0.005;
        let mut s = ChainState::new(vec![q], vec![v]).unwrap();
        let mut e = mechanical_energy(&s, &p);
        for _ in 0..200 {
            s = step(&s, &[0.0], &p).unwrap();
            let next = mechanical_energy(&s, &p);
            prop_assert!(next <= e + 1e-6, "energy rose from {} to {}", e, next);
            e = next;
        }
    }

    #[test]
    fn randomized_parameters_stay_in_range(seed in any::<u64>()) {
        let p = ChainParams::uniform(8);
        let g = PDGains::uniform(8, 25.0, 0.5);
        let dr = DRConfig::default();
        let (rp, rg) = randomize(&p, &g, &dr, &mut seeded(seed, 0));
        for j in 0..8 {
            prop_assert!(dr.damping_scale_range.contains(rp.joint_damping[j] / p.joint_damping[j]));
            prop_assert!(dr.mass_scale_range.contains(rp.link_masses[j] / p.link_masses[j]));
            prop_assert!(dr.gain_scale_range.contains(rg.kp[j] / g.kp[j]));
            prop_assert!((rg.kp[j] / g.kp[j] - rg.kd[j] / g.kd[j]).abs() < 1e-12);
        }
        prop_assert_eq!(&rp.link_lengths, &p.link_lengths);
        prop_assert_eq!(&rp.joint_inertia, &p.joint_inertia);
    }

    #[test]
    fn reference_speed_is_bounded_by_amplitude_times_frequency(t in 0.0f64..8.0, g in 0usize..4) {
        let p = ChainParams::uniform(8);
        let lib = calibrated_gait_library(&p).unwrap();
        let gait = &lib[g];
        let r = sample_reference(gait, &p, t).unwrap();
        for j in 0..8 {
            let bound = std::f64::consts::TAU * gait.frequency * gait.amplitudes[j];
            prop_assert!(r.qdot[j].abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn selector_round_trips(n in 1usize..64, m_frac in 0.0f64..1.0) {
        let m = ((m_frac * n as f64) as usize).min(n - 1);
        let s = selector_value(m, n).unwrap();
        prop_assert_eq!((s.value * n as f64).round() as usize, m);
        prop_assert!((0.0..1.0).contains(&s.value));
        prop_assert!(selector_value(n, n).is_err());
    }

    #[test]
    fn kernel_is_monotone_in_error(e in prop::collection::vec(-1.0f64..1.0, 1..8), grow in 1.0f64..3.0, sigma in 0.01f64..1.0) {
        let k = tracking_kernel(&e, sigma).unwrap();
        let bigger: Vec<f64> = e.iter().map(|x| x * grow).collect();
        let kb = tracking_kernel(&bigger, sigma).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert!(kb <= k);
        prop_assert_eq!(tracking_kernel(&vec![0.0; e.len()], sigma).unwrap(), 1.0);
    }

    #[test]
    fn style_reward_lies_in_its_range(s in state8(), t in 0.0f64..8.0) {
        let p = ChainParams::uniform(8);
        let lib = calibrated_gait_library(&p).unwrap();
        let r = sample_reference(&lib[2], &p, t).unwrap();
        let cfg = RewardConfig::default();
        let v = style_reward(&s, &r, &p, &cfg).unwrap();
        prop_assert!(v >= 0.0 && v <= 4.5 + 1e-12, "{}", v);
    }

    #[test]
    fn task_penalties_never_reward(
        s in state8(),
        tau in prop::collection::vec(-10.0f64..10.0, 8),
        a in prop::collection::vec(-10.0f64..10.0, 8),
        prev in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        let p = ChainParams::uniform(8);
        let lib = calibrated_gait_library(&p).unwrap();
        let mut cfg = RewardConfig::default();
        cfg.lin_vel.weight = 0.0;
        cfg.ang_vel.weight = 0.0;
        prop_assert!(task_reward(&s, &lib[2], &p, &tau, &a, &prev, &cfg).unwrap() <= 0.0);
    }

    #[test]
    fn decay_strictly_decreases(t in 0u64..10_000_000, dt in 1u64..1000) {
        let cfg = PriorConfig::default();
        let a = decay_coeff(TrainingClock::new(t), &cfg);
        let b = decay_coeff(TrainingClock::new(t + dt), &cfg);
        prop_assert!(b < a || a == 0.0, "{} then {}", a, b);
        prop_assert!(a > 0.0 && a <= 1.0 || a == 0.0);
    }

    #[test]
    fn zero_decay_executes_the_action(a in prop::collection::vec(-10.0f64..10.0, 8), q_ref in angles(8), q in angles(8)) {
        let beta = prior_torque(&PDGains::uniform(8, 25.0, 0.5), &q_ref, &q).unwrap();
        prop_assert_eq!(blend(&a, &beta, 0.0).unwrap(), a.clone());
        let full = blend(&a, &beta, 1.0).unwrap();
        for j in 0..8 {
            prop_assert!((full[j] - a[j] - 25.0 * (q_ref[j] - q[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn gae_matches_the_direct_sum(
        data in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, prop::bool::weighted(0.15)), 1..40),
        boot in -5.0f64..5.0,
        gamma in 0.5f64..1.0,
        lam in 0.0f64..1.0,
    ) {
        let r: Vec<f64> = data.iter().map(|x| x.0).collect();
        let v: Vec<f64> = data.iter().map(|x| x.1).collect();
        let d: Vec<bool> = data.iter().map(|x| x.2).collect();
        let (adv, ret) = compute_gae(&r, &v, boot, &d, gamma, lam).unwrap();
        for t in 0..r.len() {
            let want = gae_oracle(&r, &v, boot, &d, gamma, lam, t);
            prop_assert!((adv[t] - want).abs() <= 1e-9 * (1.0 + want.abs()));
            prop_assert!((ret[t] - adv[t] - v[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn combined_advantage_ignores_stream_scale(
        xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..200),
        ks in 0.01f64..100.0,
        kt in 0.01f64..100.0,
    ) {
        let s: Vec<f64> = xs.iter().map(|x| x.0).collect();
        let t: Vec<f64> = xs.iter().map(|x| x.1).collect();
        let base = combine_advantages(&s, &t, (1.0, 1.0)).unwrap();
        let s2: Vec<f64> = s.iter().map(|x| x * ks).collect();
        let t2: Vec<f64> = t.iter().map(|x| x * kt).collect();
        let scaled = combine_advantages(&s2, &t2, (1.0, 1.0)).unwrap();
        prop_assert_eq!(scaled, base);
        let std = standardize(&s);
        let mean = std.iter().sum::<f64>() / std.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
    }
}
