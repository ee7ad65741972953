use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::model::{reduce_phase, ModelParams};

/// Phases at which the returning field is expected to maximize bunching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatch {
    /// Solutions of `Omega tau / 2 - phi = (2k - 1) pi` and of the mirrored
    /// condition `-Omega tau / 2 - phi = (2k - 1) pi`, in `[0, 2pi)`.
    pub bunching: Vec<f64>,
    /// The same with `2k pi` on the right-hand side.
    pub antibunching: Vec<f64>,
}

/// Bunching phases for drive `omega` and delay `tau`, sorted and deduplicated.
pub fn bunching_phases(omega: f64, tau: f64) -> Vec<f64> {
    let half = 0.5 * omega * tau;
    dedup_sorted(vec![reduce_phase(half + PI), reduce_phase(-half + PI)])
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12 || (TAU - (*a - *b).abs()) < 1e-12);
    v
}

pub fn phase_match_predictor(params: &ModelParams) -> PhaseMatch {
    let half = 0.5 * params.omega * params.tau;
    PhaseMatch {
        bunching: bunching_phases(params.omega, params.tau),
        antibunching: dedup_sorted(vec![reduce_phase(half), reduce_phase(-half)]),
    }
}

/// Two readings of the loop-resonance formula `(2 pi k + phi) / (2 pi tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceReading {
    /// Angular detuning `(2 pi k + phi) / tau`, spacing `2 pi / tau`.
    Angular,
    /// The expression taken literally as an angular detuning, spacing `1 / tau`.
    Literal,
}

pub fn resonance_spacing(tau: f64, reading: ResonanceReading) -> f64 {
    match reading {
        ResonanceReading::Angular => TAU / tau,
        ResonanceReading::Literal => 1.0 / tau,
    }
}

/// Loop resonances within `[-max, max]`.
pub fn loop_resonances(params: &ModelParams, reading: ResonanceReading, max: f64) -> Vec<f64> {
    let spacing = resonance_spacing(params.tau, reading);
    let offset = params.phi() / TAU * spacing;
    let k_max = (max / spacing).ceil() as i64 + 1;
    (-k_max..=k_max)
        .map(|k| k as f64 * spacing + offset)
        .filter(|nu| nu.abs() <= max)
        .collect()
}
