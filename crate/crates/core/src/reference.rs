//! Parametric gait references.
//!
//! Every joint follows `q_j(t) = o_j + A_j * sin(2*pi*(f*t + phi_j))`. Joints
//! are grouped into four "legs" by index modulo 4, and a gait is a pattern
//! of phase offsets across those groups.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{tip_position, ChainParams};
use crate::error::{check_len, ApexError, Result};

/// Number of joint groups ("legs").
pub const GAIT_GROUPS: usize = 4;

/// Per-group phase offsets, in turns, for the four library gaits.
pub const PACE_OFFSETS: [f64; 4] = [0.0, 0.5, 0.0, 0.5];
pub const PRONK_OFFSETS: [f64; 4] = [0.0, 0.0, 0.0, 0.0];
pub const TROT_OFFSETS: [f64; 4] = [0.0, 0.5, 0.5, 0.0];
pub const CANTER_OFFSETS: [f64; 4] = [0.0, 0.3, 0.7, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitSpec {
    pub name: String,
    /// Hz.
    pub frequency: f64,
    pub amplitudes: Vec<f64>,
    /// Turns, in `[0, 1)`.
    pub phase_offsets: Vec<f64>,
    pub joint_offsets: Vec<f64>,
    /// Commanded tip height in meters.
    pub tip_height_cmd: f64,
    /// Commanded tip horizontal velocity in m/s.
    pub velocity_cmd: f64,
    /// Commanded last-link angular rate in rad/s.
    pub angular_cmd: f64,
}

impl GaitSpec {
    pub fn n_joints(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self, n_joints: usize) -> Result<()> {
        check_len("GaitSpec::amplitudes", n_joints, self.amplitudes.len())?;
        check_len("GaitSpec::phase_offsets", n_joints, self.phase_offsets.len())?;
        check_len("GaitSpec::joint_offsets", n_joints, self.joint_offsets.len())?;
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(ApexError::Config(format!(
                "gait {}: frequency must be positive",
                self.name
            )));
        }
        if !self.phase_offsets.iter().all(|p| (0.0..1.0).contains(p)) {
            return Err(ApexError::Config(format!(
                "gait {}: phase offsets must lie in [0, 1)",
                self.name
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Reference joint angles at time `t`.
    pub fn q_ref(&self, t: f64) -> Vec<f64> {
        (0..self.n_joints())
            .map(|j| {
                self.joint_offsets[j]
                    + self.amplitudes[j] * (TAU * (self.frequency * t + self.phase_offsets[j])).sin()
            })
            .collect()
    }

    /// Analytic time derivative of [`GaitSpec::q_ref`].
    pub fn qdot_ref(&self, t: f64) -> Vec<f64> {
        let w = TAU * self.frequency;
        (0..self.n_joints())
            .map(|j| self.amplitudes[j] * w * (TAU * (self.frequency * t + self.phase_offsets[j])).cos())
            .collect()
    }

    /// Sets `tip_height_cmd` to the mean reference tip height over one period.
    pub fn calibrate_height_cmd(&mut self, params: &ChainParams) {
        const SAMPLES: usize = 256;
        let period = self.period();
        let mean = (0..SAMPLES)
            .map(|i| {
                let t = period * i as f64 / SAMPLES as f64;
                tip_position(&self.q_ref(t), &params.link_lengths).1
            })
            .sum::<f64>()
            / SAMPLES as f64;
        self.tip_height_cmd = mean;
    }
}

/// One reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RefSample {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// Tip `(x, z)`.
    pub tip: (f64, f64),
}

/// Reference joint angles, their analytic derivative and the tip position
/// at time `t`.
pub fn sample_reference(gait: &GaitSpec, params: &ChainParams, t: f64) -> Result<RefSample> {
    check_len("sample_reference", params.n_joints, gait.n_joints())?;
    let q = gait.q_ref(t);
    let tip = tip_position(&q, &params.link_lengths);
    Ok(RefSample {
        qdot: gait.qdot_ref(t),
        q,
        tip,
    })
}

/// Normalized gait phase `frac(f * t)` in `[0, 1)`.
pub fn phase(gait: &GaitSpec, t: f64) -> f64 {
    let p = (gait.frequency * t).rem_euclid(1.0);
    if p >= 1.0 {
        0.0
    } else {
        p
    }
}

/// Reference trajectory sampled on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub gait: GaitSpec,
    pub duration: f64,
    pub dt: f64,
    pub samples: Vec<RefSample>,
}

impl MotionClip {
    /// Samples `floor(duration / dt) + 1` frames starting at `t = 0`.
    pub fn generate(gait: &GaitSpec, params: &ChainParams, duration: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && duration >= 0.0) {
            return Err(ApexError::Config("clip needs dt > 0 and duration >= 0".into()));
        }
        let frames = (duration / dt + 1e-9).floor() as usize + 1;
        let samples = (0..frames)
            .map(|i| sample_reference(gait, params, i as f64 * dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gait: gait.clone(),
            duration,
            dt,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with columns `t, q_ref_1..n, qdot_ref_1..n, tip_x, tip_z`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.gait.n_joints();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|j| format!("q_ref_{j}")));
        header.extend((1..=n).map(|j| format!("qdot_ref_{j}")));
        header.push("tip_x".into());
        header.push("tip_z".into());
        writeln!(out, "{}", header.join(","))?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut row = vec![(i as f64 * self.dt).to_string()];
            row.extend(s.q.iter().map(f64::to_string));
            row.extend(s.qdot.iter().map(f64::to_string));
            row.push(s.tip.0.to_string());
            row.push(s.tip.1.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Discrete motion selector `s = m / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillSelector {
    pub m: usize,
    pub n: usize,
    pub value: f64,
}

pub fn selector_value(m: usize, n: usize) -> Result<SkillSelector> {
    if n == 0 || m >= n {
        return Err(ApexError::Range(format!("selector index {m} not in 0..{n}")));
    }
    Ok(SkillSelector {
        m,
        n,
        value: m as f64 / n as f64,
    })
}

fn gait(
    name: &str,
    n_joints: usize,
    frequency: f64,
    group_offsets: [f64; 4],
    amplitude: (f64, f64),
    bend: f64,
    velocity_cmd: f64,
) -> GaitSpec {
    // Proximal joints (first four) swing wider than distal ones; joint
    // offsets alternate sign so the chain folds into a zig-zag.
    GaitSpec {
        name: name.to_string(),
        frequency,
        amplitudes: (0..n_joints)
            .map(|j| if j < GAIT_GROUPS { amplitude.0 } else { amplitude.1 })
            .collect(),
        phase_offsets: (0..n_joints).map(|j| group_offsets[j % GAIT_GROUPS]).collect(),
        joint_offsets: (0..n_joints)
            .map(|j| if j % 2 == 0 { bend } else { -bend })
            .collect(),
        tip_height_cmd: 0.0,
        velocity_cmd,
        angular_cmd: 0.0,
    }
}

/// The four library gaits in selector order: pace, pronk, trot, canter.
///
/// `tip_height_cmd` is left at zero; use [`calibrated_gait_library`] or
/// [`GaitSpec::calibrate_height_cmd`] once the chain is known.
pub fn gait_library(n_joints: usize) -> Result<Vec<GaitSpec>> {
    if n_joints < GAIT_GROUPS {
        return Err(ApexError::Config(format!(
            "gait library needs at least {GAIT_GROUPS} joints, got {n_joints}"
        )));
    }
    Ok(vec![
        gait("pace", n_joints, 1.5, PACE_OFFSETS, (0.3, 0.2), 0.15, 0.10),
        gait("pronk", n_joints, 1.25, PRONK_OFFSETS, (0.25, 0.15), 0.25, 0.0),
        gait("trot", n_joints, 1.5, TROT_OFFSETS, (0.3, 0.2), 0.15, 0.15),
        gait("canter", n_joints, 1.75, CANTER_OFFSETS, (0.3, 0.2), 0.1, 0.2),
    ])
}

/// [`gait_library`] with height commands calibrated for `params`.
pub fn calibrated_gait_library(params: &ChainParams) -> Result<Vec<GaitSpec>> {
    let mut gaits = gait_library(params.n_joints)?;
    for g in &mut gaits {
        g.calibrate_height_cmd(params);
    }
    Ok(gaits)
}
