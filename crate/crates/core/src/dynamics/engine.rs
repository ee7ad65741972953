use rand::Rng;

use super::events::{EventKind, EventRecord};
use super::propagator::{Integrator, Propagator};
use super::rng::uniform;
use crate::model::{Basis, FeedbackMode, ModelParams, StateVector};
use crate::observables::{bin_population, tls_population};
use crate::{Error, Result, C64};

/// Amplitude left in bin 0 that `shift_bins` tolerates.
pub const SHIFT_RESIDUAL_TOLERANCE: f64 = 1e-12;

/// Slack on the output-bin population before it is reported as corrupt.
const POPULATION_SLACK: f64 = 1e-9;

/// Bin relabeling used by [`Engine::shift_bins`]. Only `Advance` is
/// physical; `SkipOne` exists so the validation suite can prove it notices
/// a broken shift.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftRule {
    #[default]
    Advance,
    SkipOne,
}

/// Result of one collision step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// `<B0^dag B0>` after the no-jump/jump substep, before measurement.
    pub output_population: f64,
    pub jump: Option<EventKind>,
    pub detected: bool,
}

/// Jump probabilities for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpProbabilities {
    pub off_chip: f64,
    pub dephasing: f64,
    pub loop_loss: f64,
}

impl JumpProbabilities {
    pub fn total(&self) -> f64 {
        self.off_chip + self.dephasing + self.loop_loss
    }
}

/// The collision-model stepper for one parameter set.
#[derive(Debug, Clone)]
pub struct Engine {
    params: ModelParams,
    basis: Basis,
    propagator: Propagator,
    shift_rule: ShiftRule,
}

impl Engine {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_integrator(params, Integrator::default())
    }

    pub fn with_integrator(params: ModelParams, integrator: Integrator) -> Result<Self> {
        params.validate()?;
        let basis = Basis::new(params.n_bins)?;
        let propagator = Propagator::new(&params, &basis, integrator);
        Ok(Engine {
            params,
            basis,
            propagator,
            shift_rule: ShiftRule::Advance,
        })
    }

    #[doc(hidden)]
    pub fn with_shift_rule(mut self, rule: ShiftRule) -> Self {
        self.shift_rule = rule;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dt(&self) -> f64 {
        self.params.dt()
    }

    pub fn integrator(&self) -> Integrator {
        self.propagator.integrator()
    }

    /// Ground-state emitter, empty loop.
    pub fn initial_state(&self) -> StateVector {
        StateVector::ground(&self.basis)
    }

    /// `-i H_eff |psi>`.
    pub fn apply_effective_hamiltonian(&self, state: &StateVector) -> StateVector {
        super::hamiltonian::apply_effective_hamiltonian(&self.params, &self.basis, state)
    }

    fn check_dim(&self, state: &StateVector) -> Result<()> {
        if state.dim() != self.basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }

    /// Applies `exp(-i H_eff dt)` without renormalizing.
    pub fn evolve_no_jump(&self, state: &mut StateVector) -> Result<()> {
        self.check_dim(state)?;
        self.propagator.apply(state.amplitudes_mut());
        if !state.is_finite() {
            return Err(Error::NonFinite("no-jump evolution"));
        }
        Ok(())
    }

    pub fn jump_probabilities(&self, state: &StateVector) -> JumpProbabilities {
        let dt = self.dt();
        let excited = tls_population(state);
        let p = &self.params;
        JumpProbabilities {
            off_chip: dt * p.gamma0 * excited,
            dephasing: dt * p.gamma_prime * excited,
            loop_loss: match p.feedback {
                FeedbackMode::Loop => 0.0,
                FeedbackMode::None => dt * p.gamma_l * excited,
            },
        }
    }

    /// Decides which jump (if any) the variate `u` selects.
    pub fn choose_jump(&self, state: &StateVector, u: f64) -> Result<Option<EventKind>> {
        let probs = self.jump_probabilities(state);
        if probs.total() >= 1.0 {
            return Err(Error::JumpProbability(probs.total()));
        }
        let mut threshold = probs.off_chip;
        if u < threshold {
            return Ok(Some(EventKind::OffChipJump));
        }
        threshold += probs.dephasing;
        if u < threshold {
            return Ok(Some(EventKind::DephasingJump));
        }
        threshold += probs.loop_loss;
        if u < threshold {
            return Ok(Some(EventKind::LoopLossJump));
        }
        Ok(None)
    }

    /// Applies a jump operator (without its rate prefactor or normalization).
    pub fn apply_jump(&self, kind: EventKind, state: &mut StateVector) {
        let zero = C64::new(0.0, 0.0);
        for pair in state.amplitudes_mut().chunks_exact_mut(2) {
            match kind {
                EventKind::OffChipJump | EventKind::LoopLossJump => {
                    pair[0] = pair[1];
                    pair[1] = zero;
                }
                EventKind::DephasingJump => pair[0] = zero,
                EventKind::OutputDetection => unreachable!("detection is not an emitter jump"),
            }
        }
    }

    /// First stage of a step: a stochastic emitter jump or the no-jump
    /// evolution. Jump branches are renormalized immediately.
    pub fn qt_substep<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        rng: &mut R,
    ) -> Result<Option<EventKind>> {
        let u = uniform(rng);
        match self.choose_jump(state, u)? {
            Some(kind) => {
                self.apply_jump(kind, state);
                state.normalize()?;
                Ok(Some(kind))
            }
            None => {
                self.evolve_no_jump(state)?;
                Ok(None)
            }
        }
    }

    /// Probability of finding a photon in bin 0 (state need not be normalized).
    pub fn output_population(&self, state: &StateVector) -> Result<f64> {
        let norm_sqr = state.norm_sqr();
        if norm_sqr == 0.0 {
            return Err(Error::ZeroNorm("output population"));
        }
        let p = bin_population(&self.basis, state, 0)? / norm_sqr;
        if !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(&p) || !p.is_finite() {
            return Err(Error::CorruptPopulation(p));
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Projects on the outcome of the output-bin measurement. A detection
    /// also removes the detected photon (`B0`), leaving bin 0 empty either way.
    /// No renormalization.
    pub fn project_output(&self, state: &mut StateVector, detected: bool) {
        let zero = C64::new(0.0, 0.0);
        let occupied = self.basis.bin0_occupied();
        let amps = state.amplitudes_mut();
        if detected {
            // every amplitude with bin 0 empty is discarded; the removed-photon
            // targets are exactly such sectors, so clear them first
            for s in 0..amps.len() / 2 {
                if !is_sorted_member(occupied, s) {
                    amps[2 * s] = zero;
                    amps[2 * s + 1] = zero;
                }
            }
            for (&s, &t) in occupied.iter().zip(self.basis.bin0_removed()) {
                amps[2 * t] = amps[2 * s];
                amps[2 * t + 1] = amps[2 * s + 1];
            }
        }
        for &s in occupied {
            amps[2 * s] = zero;
            amps[2 * s + 1] = zero;
        }
    }

    /// `B0 |psi>`: annihilates the output-bin photon in every sector.
    pub fn annihilate_output(&self, state: &mut StateVector) {
        self.project_output(state, true);
    }

    /// Simulated measurement of bin 0: draws one variate, projects, and
    /// reports whether a photon was found.
    pub fn measure_output_bin<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        rng: &mut R,
    ) -> Result<bool> {
        let u = uniform(rng);
        let p = self.output_population(state)?;
        let detected = u < p;
        self.project_output(state, detected);
        Ok(detected)
    }

    /// Advances every photon one bin toward the output; bin `N - 1` becomes
    /// an empty incoming bin. Bin 0 must already be empty.
    pub fn shift_bins(&self, state: &mut StateVector) -> Result<()> {
        self.check_dim(state)?;
        let zero = C64::new(0.0, 0.0);
        let residual = self
            .basis
            .bin0_occupied()
            .iter()
            .map(|&s| {
                let a = state.amplitudes();
                a[2 * s].norm().max(a[2 * s + 1].norm())
            })
            .fold(0.0, f64::max);
        if residual > SHIFT_RESIDUAL_TOLERANCE {
            return Err(Error::OccupiedOutputBin(residual));
        }
        let source = self.basis.shift_source();
        let amps = state.amplitudes_mut();
        // sources always sit above their targets, so an ascending sweep is safe
        for t in 0..source.len() {
            let src = match self.shift_rule {
                ShiftRule::Advance => source[t],
                ShiftRule::SkipOne => source[t].and_then(|s| source[s]),
            };
            match src {
                Some(s) if s != t => {
                    amps[2 * t] = amps[2 * s];
                    amps[2 * t + 1] = amps[2 * s + 1];
                }
                Some(_) => {}
                None => {
                    amps[2 * t] = zero;
                    amps[2 * t + 1] = zero;
                }
            }
        }
        Ok(())
    }

    /// Measurement, shift and renormalization: the part of a step after the
    /// emitter substep.
    pub fn complete_step<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        rng: &mut R,
        step_index: u64,
        record: &mut EventRecord,
    ) -> Result<bool> {
        let detected = self.measure_output_bin(state, rng)?;
        if detected {
            record.push(step_index, EventKind::OutputDetection);
        }
        self.shift_bins(state)?;
        state.normalize()?;
        Ok(detected)
    }

    /// One full collision step: emitter substep, output measurement, bin
    /// shift, renormalization.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        rng: &mut R,
        step_index: u64,
        record: &mut EventRecord,
    ) -> Result<StepOutcome> {
        let jump = self.qt_substep(state, rng)?;
        if let Some(kind) = jump {
            record.push(step_index, kind);
        }
        let output_population = self.output_population(state)?;
        let detected = self.complete_step(state, rng, step_index, record)?;
        Ok(StepOutcome {
            output_population,
            jump,
            detected,
        })
    }
}

fn is_sorted_member(sorted: &[usize], x: usize) -> bool {
    sorted.binary_search(&x).is_ok()
}
