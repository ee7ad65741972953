//! One collision step and whole-trajectory execution.
//!
//! A step is: emitter jump or no-jump evolution, simulated measurement of the
//! output bin, bin shift, renormalization. Each step consumes exactly two
//! uniform variates (jump draw, then measurement draw).

mod engine;
mod events;
mod hamiltonian;
mod propagator;
mod rng;
mod trajectory;

#[doc(hidden)]
pub use engine::ShiftRule;
pub use engine::{Engine, JumpProbabilities, StepOutcome, SHIFT_RESIDUAL_TOLERANCE};
pub use events::{Event, EventKind, EventRecord};
pub use hamiltonian::apply_effective_hamiltonian;
pub use propagator::Integrator;
pub use rng::{StreamId, TrajectoryRng};
pub use trajectory::{run_trajectory, steps_for, ObservableSet, TrajectoryOutput};

pub(crate) use rng::uniform;
