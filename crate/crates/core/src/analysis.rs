//! Gait phase recovery from joint trajectories.
//!
//! Each joint's oscillation phase comes from its upward crossings of the
//! signal mean: a sinusoid `A sin(2 pi (f t + phi))` crosses upward when
//! `f t + phi` is an integer, so every crossing time `t_k` votes for
//! `phi = -f t_k (mod 1)`. Votes are averaged on the circle, per joint and
//! then per joint group, and reported relative to group 0.

use std::f64::consts::TAU;

use crate::reference::{GaitSpec, GAIT_GROUPS};

/// Signals whose peak-to-peak swing is below this (rad) count as still.
pub const MIN_SWING: f64 = 0.02;
/// A phase estimate needs at least this many crossings.
pub const MIN_CROSSINGS: usize = 3;

/// Mean of phases in turns, on the circle. `None` for an empty or
/// perfectly balanced set.
pub fn circular_mean(turns: &[f64]) -> Option<f64> {
    let (s, c) = turns.iter().fold((0.0, 0.0), |(s, c), t| (s + (TAU * t).sin(), c + (TAU * t).cos()));
    if turns.is_empty() || (s * s + c * c).sqrt() < 1e-9 * turns.len() as f64 {
        return None;
    }
    Some((s.atan2(c) / TAU).rem_euclid(1.0))
}

/// Shortest distance between two phases, in turns, in `[0, 0.5]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Interpolated times at which `x` crosses its mean upward, with a
/// hysteresis band of a quarter of the swing against chatter.
pub fn upward_crossings(x: &[f64], dt: f64) -> Vec<f64> {
    if x.len() < 2 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let band = 0.25 * (hi - lo) / 2.0;
    let mut armed = x[0] < mean - band;
    let mut out = Vec::new();
    for i in 1..x.len() {
        if x[i] < mean - band {
            armed = true;
        }
        if armed && x[i - 1] < mean && x[i] >= mean {
            let frac = (mean - x[i - 1]) / (x[i] - x[i - 1]);
            out.push((i as f64 - 1.0 + frac) * dt);
            armed = false;
        }
    }
    out
}

/// Oscillation frequency from the mean spacing of upward crossings.
pub fn crossing_frequency(crossings: &[f64]) -> Option<f64> {
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    (span > 0.0).then(|| (crossings.len() - 1) as f64 / span)
}

/// Absolute phase of one joint signal at frequency `f`, or `None` when the
/// signal does not oscillate.
pub fn joint_phase(x: &[f64], dt: f64, f: f64) -> Option<f64> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if !(hi - lo >= MIN_SWING) {
        return None;
    }
    let c = upward_crossings(x, dt);
    if c.len() < MIN_CROSSINGS {
        return None;
    }
    let votes: Vec<f64> = c.iter().map(|t| (-f * t).rem_euclid(1.0)).collect();
    circular_mean(&votes)
}

/// Recovered gait pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePattern {
    /// Dominant oscillation frequency, Hz.
    pub frequency: Option<f64>,
    /// Offset of each joint group relative to group 0, in turns. `None`
    /// marks a group (or group 0) that does not oscillate.
    pub offsets: [Option<f64>; GAIT_GROUPS],
}

impl PhasePattern {
    pub fn is_defined(&self) -> bool {
        self.offsets.iter().all(Option::is_some)
    }
}

/// Extracts the group phase pattern from a joint-angle trajectory sampled
/// every `dt`. `q[t][j]` is joint `j` at sample `t`.
pub fn extract_phase_pattern(q: &[Vec<f64>], dt: f64) -> PhasePattern {
    let undefined = PhasePattern {
        frequency: None,
        offsets: [None; GAIT_GROUPS],
    };
    let Some(n) = q.first().map(Vec::len) else {
        return undefined;
    };
    let signals: Vec<Vec<f64>> = (0..n).map(|j| q.iter().map(|row| row[j]).collect()).collect();
    let freqs: Vec<f64> = signals
        .iter()
        .filter_map(|s| crossing_frequency(&upward_crossings(s, dt)))
        .collect();
    if freqs.is_empty() {
        return undefined;
    }
    let mut sorted = freqs.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let f = sorted[sorted.len() / 2];
    let mut group_phase = [None; GAIT_GROUPS];
    for (g, slot) in group_phase.iter_mut().enumerate() {
        let phases: Vec<f64> = (g..n)
            .step_by(GAIT_GROUPS)
            .filter_map(|j| joint_phase(&signals[j], dt, f))
            .collect();
        *slot = circular_mean(&phases);
    }
    let mut offsets = [None; GAIT_GROUPS];
    if let Some(base) = group_phase[0] {
        for g in 0..GAIT_GROUPS {
            offsets[g] = group_phase[g].map(|p| (p - base).rem_euclid(1.0));
        }
    }
    PhasePattern {
        frequency: Some(f),
        offsets,
    }
}

/// Sum over groups of circular distances to a library offset pattern.
pub fn pattern_distance(offsets: &[f64; GAIT_GROUPS], reference: &[f64]) -> f64 {
    let base = reference[0];
    offsets
        .iter()
        .zip(reference)
        .map(|(o, r)| circular_distance(*o, r - base))
        .sum()
}

/// Library index whose phase-offset pattern is closest to `pattern`.
pub fn nearest_gait(pattern: &PhasePattern, library: &[GaitSpec]) -> Option<usize> {
    if !pattern.is_defined() {
        return None;
    }
    let offsets = pattern.offsets.map(|o| o.expect("checked defined"));
    library
        .iter()
        .enumerate()
        .map(|(i, g)| (i, pattern_distance(&offsets, &g.phase_offsets[..GAIT_GROUPS])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}
