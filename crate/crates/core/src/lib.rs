//! Quantum trajectories of a two-level system under repeated interactions
//! with indirect measurement, and their jump and diffusive continuous-time
//! limits.
//!
//! * [`discrete`]: the exact Markov chain of conditioned states.
//! * [`scaling`]: the √n-scaled interaction and its first-order blocks.
//! * [`belavkin_jump`], [`belavkin_diffusive`]: the two limit equations.
//! * [`experiments`]: Lindblad oracle, unravelling and convergence checks,
//!   return-to-equilibrium experiments.

pub mod belavkin_diffusive;
pub mod belavkin_jump;
pub mod discrete;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod model;
pub mod qmath;
pub mod scaling;
pub mod table;

pub use ensemble::{Execution, RngStream};
pub use error::{Error, Result};
pub use model::{ContinuousModel, MeasurementKind, ModelSpec, ReferenceState, SystemParams};
