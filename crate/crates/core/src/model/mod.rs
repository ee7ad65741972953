//! Parameters, the truncated Hilbert-space basis and the state container.

mod basis;
mod params;
mod state;

pub use basis::{Basis, Sector, Tls};
pub use params::{reduce_phase, FeedbackMode, ModelParams, MAX_BIN_COUPLING};
pub use state::StateVector;
