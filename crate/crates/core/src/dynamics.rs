//! Planar torque-controlled chain.
//!
//! Each joint follows decoupled second-order dynamics
//!
//! ```text
//! I_j * qdd_j = tau_j - b_j * qd_j - m_j * g * l_j * sin(theta_j)
//! ```
//!
//! where `theta_j` is the absolute angle of link `j` (the cumulative sum of
//! joint angles up to `j`). Angle 0 points straight down (-z), positive angles
//! rotate counterclockwise. Integration is semi-implicit Euler with a fixed
//! number of substeps per control step.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, ApexError, Result};

/// Physical parameters of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub n_joints: usize,
    pub link_lengths: Vec<f64>,
    pub link_masses: Vec<f64>,
    pub joint_damping: Vec<f64>,
    pub joint_inertia: Vec<f64>,
    pub gravity: f64,
    pub torque_limit: f64,
    /// Control step in seconds.
    pub dt: f64,
    /// Integrator substeps per control step.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    4
}

impl ChainParams {
    /// Identical links, the desk-scale default used by the run configs.
    pub fn uniform(n_joints: usize) -> Self {
        Self {
            n_joints,
            link_lengths: vec![0.1; n_joints],
            link_masses: vec![0.5; n_joints],
            joint_damping: vec![0.5; n_joints],
            joint_inertia: vec![0.05; n_joints],
            gravity: 9.81,
            torque_limit: 10.0,
            dt: 0.02,
            substeps: default_substeps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_joints;
        if n == 0 {
            return Err(ApexError::Config("n_joints must be at least 1".into()));
        }
        check_len("link_lengths", n, self.link_lengths.len())?;
        check_len("link_masses", n, self.link_masses.len())?;
        check_len("joint_damping", n, self.joint_damping.len())?;
        check_len("joint_inertia", n, self.joint_inertia.len())?;
        let positive = |name: &str, v: &[f64]| {
            if v.iter().all(|x| x.is_finite() && *x > 0.0) {
                Ok(())
            } else {
                Err(ApexError::Config(format!("{name} must be positive")))
            }
        };
        positive("link_lengths", &self.link_lengths)?;
        positive("link_masses", &self.link_masses)?;
        positive("joint_inertia", &self.joint_inertia)?;
        if !self.joint_damping.iter().all(|b| b.is_finite() && *b >= 0.0) {
            return Err(ApexError::Config("joint_damping must be non-negative".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ApexError::Config("dt must be positive".into()));
        }
        if !(self.torque_limit > 0.0 && self.torque_limit.is_finite()) {
            return Err(ApexError::Config("torque_limit must be positive".into()));
        }
        if self.substeps == 0 {
            return Err(ApexError::Config("substeps must be at least 1".into()));
        }
        if !self.gravity.is_finite() {
            return Err(ApexError::Config("gravity must be finite".into()));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }
}

/// Joint-space state of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub step_index: u64,
}

impl ChainState {
    /// All links hanging straight down, at rest.
    pub fn at_rest(n_joints: usize) -> Self {
        Self {
            q: vec![0.0; n_joints],
            qdot: vec![0.0; n_joints],
            step_index: 0,
        }
    }

    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Result<Self> {
        check_len("ChainState::qdot", q.len(), qdot.len())?;
        Ok(Self {
            q,
            qdot,
            step_index: 0,
        })
    }

    pub fn n_joints(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|x| x.is_finite())
    }

    /// Largest `|q_i|`.
    pub fn max_abs_angle(&self) -> f64 {
        self.q.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Proportional-derivative gains per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PDGains {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
}

impl PDGains {
    pub fn uniform(n_joints: usize, kp: f64, kd: f64) -> Self {
        Self {
            kp: vec![kp; n_joints],
            kd: vec![kd; n_joints],
        }
    }

    pub fn validate(&self, n_joints: usize) -> Result<()> {
        check_len("PDGains::kp", n_joints, self.kp.len())?;
        check_len("PDGains::kd", n_joints, self.kd.len())?;
        if !self.kp.iter().all(|k| k.is_finite() && *k > 0.0) {
            return Err(ApexError::Config("kp must be positive".into()));
        }
        if !self.kd.iter().all(|k| k.is_finite() && *k >= 0.0) {
            return Err(ApexError::Config("kd must be non-negative".into()));
        }
        Ok(())
    }
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub const ONE: Interval = Interval(1.0, 1.0);

    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.0 && x <= self.1
    }

    /// Uniform draw; degenerate intervals return `lo` exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.0 + (self.1 - self.0) * u
    }
}

/// Domain-randomization ranges, chain analogues of the legged-robot ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DRConfig {
    /// Joint-damping scale, the stand-in for ground friction.
    pub damping_scale_range: Interval,
    pub mass_scale_range: Interval,
    pub gain_scale_range: Interval,
    /// Seconds between pushes.
    pub push_interval_range: Interval,
    /// Largest per-joint velocity kick in rad/s.
    pub push_qdot_max: f64,
}

impl Default for DRConfig {
    fn default() -> Self {
        Self {
            damping_scale_range: Interval(0.3, 1.25),
            mass_scale_range: Interval(0.9, 1.1),
            gain_scale_range: Interval(0.9, 1.1),
            push_interval_range: Interval(4.0, 5.0),
            push_qdot_max: 0.4,
        }
    }
}

impl DRConfig {
    /// No randomization and no pushes.
    pub fn disabled() -> Self {
        Self {
            damping_scale_range: Interval::ONE,
            mass_scale_range: Interval::ONE,
            gain_scale_range: Interval::ONE,
            push_interval_range: Interval(f64::INFINITY, f64::INFINITY),
            push_qdot_max: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv) in [
            ("damping_scale_range", self.damping_scale_range),
            ("mass_scale_range", self.mass_scale_range),
            ("gain_scale_range", self.gain_scale_range),
        ] {
            if !(iv.lo() > 0.0 && iv.lo() <= iv.hi() && iv.hi().is_finite()) {
                return Err(ApexError::Config(format!(
                    "{name} must be a nonempty interval with positive lower bound"
                )));
            }
        }
        let p = self.push_interval_range;
        if !(p.lo() > 0.0 && p.lo() <= p.hi()) {
            return Err(ApexError::Config(
                "push_interval_range must be a nonempty positive interval".into(),
            ));
        }
        if !(self.push_qdot_max >= 0.0 && self.push_qdot_max.is_finite()) {
            return Err(ApexError::Config("push_qdot_max must be non-negative".into()));
        }
        Ok(())
    }
}

/// `kp * (q_des - q) - kd * qdot`, elementwise, unclamped.
pub fn pd_torque(gains: &PDGains, q_des: &[f64], q: &[f64], qdot: &[f64]) -> Result<Vec<f64>> {
    let n = gains.kp.len();
    check_len("pd_torque::kd", n, gains.kd.len())?;
    check_len("pd_torque::q_des", n, q_des.len())?;
    check_len("pd_torque::q", n, q.len())?;
    check_len("pd_torque::qdot", n, qdot.len())?;
    Ok((0..n)
        .map(|i| gains.kp[i] * (q_des[i] - q[i]) - gains.kd[i] * qdot[i])
        .collect())
}

/// Clamps every entry to `[-limit, limit]`.
pub fn clamp_torque(torque: &[f64], limit: f64) -> Vec<f64> {
    torque.iter().map(|t| t.clamp(-limit, limit)).collect()
}

/// Absolute link angles: running sum of joint angles.
pub fn absolute_angles(q: &[f64]) -> Vec<f64> {
    q.iter()
        .scan(0.0, |acc, qi| {
            *acc += qi;
            Some(*acc)
        })
        .collect()
}

/// Advances one control step. The torque is clamped to the torque limit
/// before integration.
pub fn step(state: &ChainState, torque: &[f64], params: &ChainParams) -> Result<ChainState> {
    let n = params.n_joints;
    check_len("step::torque", n, torque.len())?;
    check_len("step::q", n, state.q.len())?;
    check_len("step::qdot", n, state.qdot.len())?;

    let tau = clamp_torque(torque, params.torque_limit);
    let h = params.dt / params.substeps as f64;
    let mut q = state.q.clone();
    let mut qdot = state.qdot.clone();
    for _ in 0..params.substeps {
        let mut theta = 0.0;
        for j in 0..n {
            theta += q[j];
            let gravity = params.link_masses[j] * params.gravity * params.link_lengths[j] * theta.sin();
            let acc = (tau[j] - params.joint_damping[j] * qdot[j] - gravity) / params.joint_inertia[j];
            qdot[j] += h * acc;
        }
        for j in 0..n {
            q[j] += h * qdot[j];
        }
    }
    if let Some(joint) = (0..n).find(|&j| !(q[j].is_finite() && qdot[j].is_finite())) {
        return Err(ApexError::SimulationDiverged { joint });
    }
    Ok(ChainState {
        q,
        qdot,
        step_index: state.step_index + 1,
    })
}

/// Tip position `(x, z)`.
pub fn forward_kinematics(q: &[f64], params: &ChainParams) -> Result<(f64, f64)> {
    check_len("forward_kinematics::q", params.n_joints, q.len())?;
    Ok(tip_position(q, &params.link_lengths))
}

pub(crate) fn tip_position(q: &[f64], lengths: &[f64]) -> (f64, f64) {
    let mut theta = 0.0;
    let (mut x, mut z) = (0.0, 0.0);
    for (qi, l) in q.iter().zip(lengths) {
        theta += qi;
        x += l * theta.sin();
        z -= l * theta.cos();
    }
    (x, z)
}

/// Cartesian tip velocity `(xdot, zdot)`.
pub fn tip_velocity(q: &[f64], qdot: &[f64], params: &ChainParams) -> Result<(f64, f64)> {
    check_len("tip_velocity::q", params.n_joints, q.len())?;
    check_len("tip_velocity::qdot", params.n_joints, qdot.len())?;
    Ok(tip_velocity_raw(q, qdot, &params.link_lengths))
}

pub(crate) fn tip_velocity_raw(q: &[f64], qdot: &[f64], lengths: &[f64]) -> (f64, f64) {
    let mut theta = 0.0;
    let mut theta_dot = 0.0;
    let (mut vx, mut vz) = (0.0, 0.0);
    for ((qi, qdi), l) in q.iter().zip(qdot).zip(lengths) {
        theta += qi;
        theta_dot += qdi;
        vx += l * theta.cos() * theta_dot;
        vz += l * theta.sin() * theta_dot;
    }
    (vx, vz)
}

/// Absolute angle of the last link.
pub fn tip_angle(q: &[f64]) -> f64 {
    q.iter().sum()
}

/// Angular rate of the last link.
pub fn tip_angular_rate(qdot: &[f64]) -> f64 {
    qdot.iter().sum()
}

/// Kinetic plus gravitational energy, zero for the hanging chain at rest.
///
/// The decoupled gravity term is only conservative for a single link, so
/// this is a true Lyapunov function only when `n_joints == 1`.
pub fn mechanical_energy(state: &ChainState, params: &ChainParams) -> f64 {
    let mut theta = 0.0;
    let mut energy = 0.0;
    for j in 0..params.n_joints {
        theta += state.q[j];
        energy += 0.5 * params.joint_inertia[j] * state.qdot[j] * state.qdot[j];
        energy += params.link_masses[j] * params.gravity * params.link_lengths[j] * (1.0 - theta.cos());
    }
    energy
}

/// Fresh copies of `params` and `gains` with damping, masses and gains
/// scaled by independent per-joint uniform draws.
pub fn randomize<R: Rng + ?Sized>(
    params: &ChainParams,
    gains: &PDGains,
    dr: &DRConfig,
    rng: &mut R,
) -> (ChainParams, PDGains) {
    let mut p = params.clone();
    let mut g = gains.clone();
    for b in &mut p.joint_damping {
        *b *= dr.damping_scale_range.sample(rng);
    }
    for m in &mut p.link_masses {
        *m *= dr.mass_scale_range.sample(rng);
    }
    for (kp, kd) in g.kp.iter_mut().zip(g.kd.iter_mut()) {
        let s = dr.gain_scale_range.sample(rng);
        *kp *= s;
        *kd *= s;
    }
    (p, g)
}

/// Per-episode push threshold, drawn once from `push_interval_range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushSchedule {
    pub threshold: f64,
}

impl PushSchedule {
    pub fn sample<R: Rng + ?Sized>(dr: &DRConfig, rng: &mut R) -> Self {
        let iv = dr.push_interval_range;
        let threshold = if iv.lo().is_finite() { iv.sample(rng) } else { f64::INFINITY };
        Self { threshold }
    }
}

/// Adds a uniform velocity kick in `[-push_qdot_max, push_qdot_max]` to
/// every joint once `time_since_push` exceeds the schedule's threshold.
/// Returns the new state and whether the push timer should reset.
pub fn apply_push<R: Rng + ?Sized>(
    state: &ChainState,
    dr: &DRConfig,
    schedule: &PushSchedule,
    rng: &mut R,
    time_since_push: f64,
) -> (ChainState, bool) {
    if !(time_since_push > schedule.threshold) {
        return (state.clone(), false);
    }
    let mut next = state.clone();
    let max = dr.push_qdot_max;
    for v in &mut next.qdot {
        let u: f64 = rng.random();
        *v += (2.0 * u - 1.0) * max;
    }
    (next, true)
}
