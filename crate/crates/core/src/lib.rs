//! Drifted Brownian particles on the half-line, absorbed by a boundary that
//! advances by δ per absorbed particle.
//!
//! [`engine`] simulates the system; [`analytic`] holds the closed-form laws
//! used as oracles; [`chains`] and [`stats`] turn samples into verdicts.

pub mod analytic;
pub mod chains;
pub mod engine;
pub mod field;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use engine::{run, run_replicas, EngineError, RunOptions};
pub use model::{BoundaryMode, EngineKind, SystemParams, Trajectory};
