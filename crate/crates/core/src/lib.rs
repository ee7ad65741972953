//! Quantum-trajectory simulation of a coherently driven two-level emitter
//! coupled to a mirror-terminated waveguide.
//!
//! The waveguide is represented as a chain of `N` time bins (a collision
//! model): the emitter couples into bin `N - 1`, the field travels around the
//! feedback loop one bin per step and meets the emitter again in bin `0`,
//! where it is measured and leaves the system. At most two photons live in
//! the loop and at most one photon occupies a single bin.
//!
//! Modules:
//! - [`model`]: parameters, the truncated basis and the state vector.
//! - [`dynamics`]: one collision step and whole-trajectory execution.
//! - [`observables`]: flux, loop photon statistics, waiting times, steady state.
//! - [`correlations`]: `g2`, `g1` and the incoherent output spectrum.
//! - [`oracle`]: dense reference solvers used for validation.
//! - [`ensemble`]: configuration, parallel ensembles, sweeps and file output.

pub mod correlations;
pub mod dynamics;
pub mod ensemble;
mod error;
pub mod model;
pub mod observables;
pub mod oracle;

pub use error::{Error, Result};
pub use model::{Basis, FeedbackMode, ModelParams, Sector, StateVector, Tls};

pub use num_complex::Complex64 as C64;
