use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::events::EventRecord;
use super::rng::StreamId;
use crate::observables::{loop_photon_probabilities, tls_population};
use crate::{Error, Result};

/// Per-step series to record along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSet {
    /// Output flux `N_B0 / dt`, taken after the emitter substep.
    pub flux: bool,
    /// `<s+ s->` at the end of the step.
    pub tls_population: bool,
    /// `(p0, p1, p2)` at the end of the step.
    pub loop_probabilities: bool,
}

impl ObservableSet {
    pub fn all() -> Self {
        ObservableSet {
            flux: true,
            tls_population: true,
            loop_probabilities: true,
        }
    }

    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryOutput {
    /// `(s + 1) dt` for step `s`.
    pub times: Vec<f64>,
    pub flux: Vec<f64>,
    pub tls_population: Vec<f64>,
    pub loop_probabilities: Vec<[f64; 3]>,
    pub record: EventRecord,
}

/// Number of whole steps needed to reach time `t`.
pub fn steps_for(t: f64, dt: f64) -> usize {
    (t / dt - 1e-9).ceil().max(0.0) as usize
}

/// Runs one trajectory from the initial state to `t_end`.
pub fn run_trajectory(
    engine: &Engine,
    stream: StreamId,
    t_end: f64,
    observables: ObservableSet,
) -> Result<TrajectoryOutput> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParams(format!("t_end = {t_end} must be > 0")));
    }
    let dt = engine.dt();
    let n_steps = steps_for(t_end, dt);
    let mut rng = stream.rng();
    let mut psi = engine.initial_state();
    let mut out = TrajectoryOutput::default();
    let reserve = |on: bool| if on { n_steps } else { 0 };
    out.times.reserve(n_steps);
    out.flux.reserve(reserve(observables.flux));
    out.tls_population
        .reserve(reserve(observables.tls_population));
    out.loop_probabilities
        .reserve(reserve(observables.loop_probabilities));
    for s in 0..n_steps {
        let outcome = engine.step(&mut psi, &mut rng, s as u64, &mut out.record)?;
        out.times.push((s + 1) as f64 * dt);
        if observables.flux {
            out.flux.push(outcome.output_population / dt);
        }
        if observables.tls_population {
            out.tls_population.push(tls_population(&psi));
        }
        if observables.loop_probabilities {
            out.loop_probabilities
                .push(loop_photon_probabilities(engine.basis(), &psi));
        }
    }
    Ok(out)
}
