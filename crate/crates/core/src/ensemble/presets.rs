//! Named parameter bundles for the published figures, scaled down in
//! trajectory count for desk-sized runs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SweepSpec};
use crate::model::ModelParams;
use crate::Error;

/// Fraction of the published trajectory counts used by default.
pub const DEFAULT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Mollow triplet with a short loop, `phi = pi` (spectrum).
    Fig2,
    /// `g2` for the short-loop setups.
    Fig3,
    /// Output flux with off-chip decay, `phi = pi`.
    Fig4,
    /// Detuned, dephased Mollow triplet with a short loop.
    Fig5,
    /// Waiting times, short loop, `phi = pi`.
    Fig6,
    /// `g2(dt)` and loop occupancy against the delay, `phi = 0`.
    Fig7,
    /// `g2(dt)` against the round-trip phase, `tau = 0.5`.
    Fig9,
    /// Loop resonances in the spectrum, `tau = 2`.
    Fig10,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig9,
        Preset::Fig10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig9 => "fig9",
            Preset::Fig10 => "fig10",
        }
    }

    /// Published trajectory count per ensemble.
    pub fn published_trajectories(self) -> usize {
        match self {
            Preset::Fig7 | Preset::Fig9 => 10_000,
            _ => 20_000,
        }
    }

    /// The subcommand the figure is made with.
    pub fn command(self) -> &'static str {
        match self {
            Preset::Fig2 | Preset::Fig5 | Preset::Fig10 => "spectrum",
            Preset::Fig3 => "g2",
            Preset::Fig4 => "flux",
            Preset::Fig6 => "wtd",
            Preset::Fig7 | Preset::Fig9 => "sweep",
        }
    }

    pub fn config(self) -> RunConfig {
        self.scaled(DEFAULT_SCALE)
    }

    /// Configuration with `scale` times the published trajectory count.
    pub fn scaled(self, scale: f64) -> RunConfig {
        let mut c = RunConfig::default();
        let short_loop = |omega: f64, phi: f64| {
            ModelParams::symmetric(1.0, 0.1, 10)
                .with_omega(omega)
                .with_phi(phi)
        };
        match self {
            Preset::Fig2 => {
                c.model = short_loop(2.0 * PI, PI);
                c.correlation.t2_max = 10.0;
            }
            Preset::Fig3 => {
                c.model = short_loop(2.0 * PI, PI);
                c.correlation.t2_max = 2.0;
            }
            Preset::Fig4 => {
                c.model = short_loop(0.4 * PI, PI).with_gamma0(0.1);
                c.run.t_end = 20.0;
            }
            Preset::Fig5 => {
                c.model = short_loop(2.0 * PI, PI)
                    .with_delta(5.0)
                    .with_gamma_prime(0.5);
                c.correlation.t2_max = 10.0;
            }
            Preset::Fig6 => {
                c.model = short_loop(2.0 * PI, PI);
                c.run.t_end = 60.0;
            }
            Preset::Fig7 => {
                // dt = 0.05 keeps tau = 2.5 at 50 bins
                c.model = ModelParams::symmetric(1.0, 0.1, 2).with_omega(0.4 * PI);
                c.correlation.t_ss = Some(15.0);
                c.sweep = Some(SweepSpec {
                    parameter: "tau".into(),
                    values: vec![0.1, 0.5, 1.0, 1.5, 2.0, 2.5],
                    keep_dt: true,
                });
            }
            Preset::Fig9 => {
                c.model = ModelParams::symmetric(1.0, 0.5, 20).with_omega(0.4 * PI);
                c.correlation.t_ss = Some(15.0);
                c.sweep = Some(SweepSpec {
                    parameter: "phi".into(),
                    values: (0..=20).map(|k| k as f64 * 0.1 * PI).collect(),
                    keep_dt: true,
                });
            }
            Preset::Fig10 => {
                c.model = ModelParams::symmetric(1.0, 2.0, 40).with_omega(2.0 * PI);
                c.correlation.t2_max = 20.0;
            }
        }
        c.run.n_trajectories =
            ((self.published_trajectories() as f64 * scale).round() as usize).max(1);
        c.output.dir = format!("out/{}", self.name()).into();
        c
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}
