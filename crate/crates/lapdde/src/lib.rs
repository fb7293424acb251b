//! Simulation and verification toolkit for delayed averaging consensus over
//! time-varying directed graphs: integrates the delayed consensus equations
//! and their differential-inequality relaxations, computes evolutionary
//! matrices, and checks the structural hypotheses (interval type-symmetry,
//! repeated strong connectivity, weight-integral bounds) behind eventual
//! consensus as executable predicates.

pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod graph;
pub mod history;
pub mod model;
pub mod scenarios;

pub use error::{Error, Result};
