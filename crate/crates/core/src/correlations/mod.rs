//! Steady-state output correlation functions and the incoherent spectrum.
//!
//! Both protocols start from a trajectory run to the steady-state time `t_ss`
//! and then manipulate its final step:
//!
//! - `g2`: the photon in the output bin is annihilated instead of measured,
//!   and the bin population is recorded on the following steps.
//! - `G1`: a follower copy `B0 |lead>` is split off and driven through the
//!   same jumps and projections as the lead, rescaled by the lead's norm;
//!   `G1 = <lead| B0^dag |follower>`.
//!
//! Values at delay `m dt` are taken after the emitter substep of the `m`-th
//! step after `t_ss`, like the output flux.

mod g1;
mod g2;
mod phase;
mod spectrum;

use serde::{Deserialize, Serialize};

use crate::C64;

pub use g1::{g1_normalized, g1_trajectory, G1Accumulator, G1Ensemble, G1Trajectory};
pub use g2::{g2_trajectory, G2Accumulator, G2Estimator, G2Trajectory};
pub use phase::{
    bunching_phases, loop_resonances, phase_match_predictor, resonance_spacing, PhaseMatch,
    ResonanceReading,
};
pub use spectrum::{detuning_grid, incoherent_spectrum, SpectrumSeries, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationKind {
    /// Unnormalized first order, in output-bin units.
    #[serde(rename = "G1")]
    FirstOrder,
    #[serde(rename = "g1")]
    FirstOrderNormalized,
    /// Unnormalized second order, in output-bin units.
    #[serde(rename = "G2")]
    SecondOrder,
    #[serde(rename = "g2")]
    SecondOrderNormalized,
}

impl CorrelationKind {
    pub fn is_complex(self) -> bool {
        matches!(
            self,
            CorrelationKind::FirstOrder | CorrelationKind::FirstOrderNormalized
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            CorrelationKind::FirstOrder => "G1",
            CorrelationKind::FirstOrderNormalized => "g1",
            CorrelationKind::SecondOrder => "G2",
            CorrelationKind::SecondOrderNormalized => "g2",
        }
    }
}

/// A correlation function against delay `t2`. Real kinds keep zero
/// imaginary parts; `std_error` holds the errors of the real and imaginary
/// parts separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub kind: CorrelationKind,
    pub delays: Vec<f64>,
    pub values: Vec<C64>,
    pub std_error: Vec<C64>,
    pub n_trajectories: usize,
    /// Trajectories that contributed nothing (no photon to annihilate).
    pub skipped: usize,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn real_error(&self) -> Vec<f64> {
        self.std_error.iter().map(|v| v.re).collect()
    }

    /// Value and error at the first nonzero delay, `g2(dt)` for `g2`.
    pub fn first_step(&self) -> Option<(C64, C64)> {
        Some((*self.values.get(1)?, *self.std_error.get(1)?))
    }
}

/// Settings shared by the correlation protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSettings {
    /// Steady-state time; detected from a pilot ensemble when absent.
    pub t_ss: Option<f64>,
    pub t2_max: f64,
    pub estimator: G2Estimator,
    pub window: Window,
    /// Spectrum grid: `n_detunings` points on `[-detuning_max, detuning_max]`.
    pub detuning_max: f64,
    pub n_detunings: usize,
    /// Batches for spectrum standard errors.
    pub n_batches: usize,
    /// Pilot ensemble for steady-state detection.
    pub pilot_trajectories: usize,
    pub pilot_t_end: f64,
    pub steady_rel_tol: f64,
    pub steady_window: f64,
}

impl Default for CorrelationSettings {
    fn default() -> Self {
        CorrelationSettings {
            t_ss: None,
            t2_max: 10.0,
            estimator: G2Estimator::Weighted,
            window: Window::Exponential,
            detuning_max: 15.0,
            n_detunings: 601,
            n_batches: 50,
            pilot_trajectories: 500,
            pilot_t_end: 30.0,
            steady_rel_tol: crate::observables::STEADY_STATE_REL_TOL,
            steady_window: crate::observables::STEADY_STATE_WINDOW,
        }
    }
}

/// Welford mean and variance of one scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m2.max(0.0) / (n - 1.0) / n).sqrt()
    }
}
