use serde::{Deserialize, Serialize};

use super::G1Ensemble;
use crate::{Error, Result, C64};

/// Apodization of `G1` before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// `exp(-t2 / (t2_max / 5))`.
    #[default]
    Exponential,
    /// No taper.
    Raw,
}

impl Window {
    fn weight(self, t: f64, t2_max: f64) -> f64 {
        match self {
            Window::Exponential => (-5.0 * t / t2_max).exp(),
            Window::Raw => 1.0,
        }
    }
}

/// Plateau check: the last `G1` value must be within this fraction of
/// `G1(0)` from the coherent term.
const PLATEAU_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    /// `omega - omega_L`.
    pub detunings: Vec<f64>,
    pub values: Vec<f64>,
    /// From batch means; zero with fewer than two batches.
    pub std_error: Vec<f64>,
    pub window: Window,
    pub t2_max: f64,
    pub n_trajectories: usize,
    pub coherent_term: f64,
    /// `|G1(t2_max) - |<B0>|^2| / G1(0)`.
    pub plateau_residual: f64,
    pub plateau_reached: bool,
}

/// `n` points spaced evenly on `[-max, max]`.
pub fn detuning_grid(max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| {
            let v = -max + 2.0 * max * k as f64 / (n - 1) as f64;
            // pin the centre to exactly zero for odd n
            if 2 * k + 1 == n {
                0.0
            } else {
                v
            }
        })
        .collect()
}

fn transform(g1: &[C64], coherent: f64, dt: f64, detunings: &[f64], window: Window) -> Vec<f64> {
    let last = g1.len() - 1;
    let t2_max = last as f64 * dt;
    let weighted: Vec<C64> = g1
        .iter()
        .enumerate()
        .map(|(m, g)| {
            let trapezoid = if m == 0 || m == last { 0.5 } else { 1.0 };
            (g - coherent) * (trapezoid * window.weight(m as f64 * dt, t2_max))
        })
        .collect();
    detunings
        .iter()
        .map(|&nu| {
            // rotate by exp(-i nu dt) recursively, re-seeding to limit drift
            let step = C64::from_polar(1.0, -nu * dt);
            let mut phase = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for (m, w) in weighted.iter().enumerate() {
                if m % 256 == 0 {
                    phase = C64::from_polar(1.0, -nu * m as f64 * dt);
                }
                acc += w * phase;
                phase *= step;
            }
            2.0 * acc.re
        })
        .collect()
}

/// Incoherent output spectrum
/// `S(nu) = 2 Re sum_m c_m exp(-i nu t_m) w(t_m) [G1(t_m) - |<B0>|^2]`
/// with trapezoid weights `c_m` and window `w`. A component of `G1`
/// oscillating as `exp(i nu0 t2)` appears at `+nu0`.
pub fn incoherent_spectrum(
    ensemble: &G1Ensemble,
    dt: f64,
    detunings: &[f64],
    window: Window,
) -> Result<SpectrumSeries> {
    let g1 = &ensemble.g1.values;
    if g1.len() < 2 {
        return Err(Error::InvalidParams("G1 needs at least two delays".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt = {dt} must be > 0")));
    }
    let coherent = ensemble.coherent_term();
    let values = transform(g1, coherent, dt, detunings, window);
    let std_error = if ensemble.batches.len() >= 2 {
        let per_batch: Vec<Vec<f64>> = ensemble
            .batches
            .iter()
            .map(|b| transform(b, coherent, dt, detunings, window))
            .collect();
        let nb = per_batch.len() as f64;
        (0..detunings.len())
            .map(|k| {
                let mean = per_batch.iter().map(|s| s[k]).sum::<f64>() / nb;
                let var = per_batch.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
                (var / nb).sqrt()
            })
            .collect()
    } else {
        vec![0.0; detunings.len()]
    };
    let g0 = g1[0].re;
    let plateau_residual = if g0 > 0.0 {
        (g1[g1.len() - 1] - coherent).norm() / g0
    } else {
        f64::INFINITY
    };
    Ok(SpectrumSeries {
        detunings: detunings.to_vec(),
        values,
        std_error,
        window,
        t2_max: (g1.len() - 1) as f64 * dt,
        n_trajectories: ensemble.g1.n_trajectories,
        coherent_term: coherent,
        plateau_residual,
        plateau_reached: plateau_residual <= PLATEAU_TOLERANCE,
    })
}
