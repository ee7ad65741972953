use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest allowed `dt * (gamma_L + gamma_R)`; beyond this the
/// one-photon-per-bin truncation is no longer justified.
pub const MAX_BIN_COUPLING: f64 = 0.1;

/// Whether the loop returns the emitted field to the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Photons emitted into bin `N - 1` travel around the loop and return in bin 0.
    #[default]
    Loop,
    /// Infinite-delay baseline: emission into the loop side is an
    /// unmonitored Markovian decay `sqrt(gamma_L) sigma^-`; only the output
    /// bin couples to the emitter.
    None,
}

/// Physical and numerical parameters of the emitter–waveguide system.
///
/// Rates are angular (1/time). `tau` and `n_bins` are the canonical inputs;
/// the step `dt = tau / n_bins` is always derived, and the round-trip phase is
/// kept reduced to `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Coupling into the feedback loop.
    #[serde(rename = "gamma_L")]
    pub gamma_l: f64,
    /// Coupling toward the output.
    #[serde(rename = "gamma_R")]
    pub gamma_r: f64,
    /// Off-chip radiative decay.
    pub gamma0: f64,
    /// Pure dephasing.
    pub gamma_prime: f64,
    /// Rabi frequency of the drive.
    #[serde(rename = "Omega")]
    pub omega: f64,
    /// Laser–emitter detuning `omega_0 - omega_L`.
    pub delta: f64,
    #[serde(deserialize_with = "deserialize_phase")]
    phi: f64,
    /// Round-trip delay.
    pub tau: f64,
    /// Number of bins `N` representing the loop.
    pub n_bins: usize,
    #[serde(default)]
    pub feedback: FeedbackMode,
}

fn deserialize_phase<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    f64::deserialize(d).map(reduce_phase)
}

/// Reduces an angle to `[0, 2pi)`.
pub fn reduce_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl ModelParams {
    /// Symmetric coupling `gamma_L = gamma_R = gamma_total / 2`, no drive,
    /// no extra dissipation, zero phase.
    pub fn symmetric(gamma_total: f64, tau: f64, n_bins: usize) -> Self {
        ModelParams {
            gamma_l: 0.5 * gamma_total,
            gamma_r: 0.5 * gamma_total,
            gamma0: 0.0,
            gamma_prime: 0.0,
            omega: 0.0,
            delta: 0.0,
            phi: 0.0,
            tau,
            n_bins,
            feedback: FeedbackMode::Loop,
        }
    }

    /// Infinite-delay baseline with time step `dt` (two bins, loop disabled).
    pub fn without_feedback(gamma_total: f64, dt: f64) -> Self {
        ModelParams {
            feedback: FeedbackMode::None,
            ..ModelParams::symmetric(gamma_total, 2.0 * dt, 2)
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = reduce_phase(phi);
        self
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Self {
        self.gamma0 = gamma0;
        self
    }

    pub fn with_gamma_prime(mut self, gamma_prime: f64) -> Self {
        self.gamma_prime = gamma_prime;
        self
    }

    pub fn with_feedback(mut self, feedback: FeedbackMode) -> Self {
        self.feedback = feedback;
        self
    }

    /// Changes `tau` and picks the bin count keeping the step as close as
    /// possible to `dt`.
    pub fn with_tau_at_step(mut self, tau: f64, dt: f64) -> Self {
        self.tau = tau;
        self.n_bins = ((tau / dt).round() as usize).max(2);
        self
    }

    /// Round-trip phase in `[0, 2pi)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn set_phi(&mut self, phi: f64) {
        self.phi = reduce_phase(phi);
    }

    /// Time step `tau / N`.
    pub fn dt(&self) -> f64 {
        self.tau / self.n_bins as f64
    }

    /// Total waveguide decay `gamma_L + gamma_R`; the unit of all reported rates.
    pub fn gamma_total(&self) -> f64 {
        self.gamma_l + self.gamma_r
    }

    /// Rate of the Markovian (jump) channels acting on the excited state.
    pub(crate) fn markovian_decay(&self) -> f64 {
        let loop_loss = match self.feedback {
            FeedbackMode::Loop => 0.0,
            FeedbackMode::None => self.gamma_l,
        };
        self.gamma0 + self.gamma_prime + loop_loss
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma_L", self.gamma_l),
            ("gamma_R", self.gamma_r),
            ("gamma0", self.gamma0),
            ("gamma_prime", self.gamma_prime),
        ];
        for (name, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        for (name, v) in [
            ("Omega", self.omega),
            ("delta", self.delta),
            ("phi", self.phi),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite")));
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tau = {} must be > 0",
                self.tau
            )));
        }
        if self.n_bins < 2 {
            return Err(Error::InvalidParams(format!(
                "n_bins = {} must be >= 2",
                self.n_bins
            )));
        }
        let coupling = self.dt() * self.gamma_total();
        if coupling >= MAX_BIN_COUPLING {
            return Err(Error::InvalidParams(format!(
                "dt * (gamma_L + gamma_R) = {coupling:.4} must be < {MAX_BIN_COUPLING}; use more bins"
            )));
        }
        Ok(())
    }
}
