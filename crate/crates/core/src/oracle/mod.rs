//! Dense reference solvers, used only to validate the trajectory engine.
//!
//! - [`lindblad`]: the driven emitter without feedback as a 2x2 master
//!   equation, plus quantum-regression correlation functions.
//! - [`collision`]: the full emitter-plus-loop density matrix evolved through
//!   the same collision steps, for up to eight bins.
//!
//! Both build their operators from the model definition on their own basis
//! layout; nothing here calls into the engine.

pub mod collision;
pub mod lindblad;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::C64;

pub use collision::{
    unconditional_collision_evolve, CollisionOracle, CollisionSeries, ORACLE_MAX_BINS,
};
pub use lindblad::{
    binned_regression, regression_correlations, RegressionSeries, TlsMasterEquation,
};

/// A density matrix with its consistency checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub DMatrix<C64>);

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `max |rho - rho^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.0 - self.0.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Scalar summaries of one oracle check, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub name: String,
    pub passed: bool,
    /// Largest `|difference| / allowed` over the compared points.
    pub worst_ratio: f64,
    pub detail: String,
}
