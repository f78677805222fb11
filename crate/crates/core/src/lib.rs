//! Variational linear-algebra primitives on simulated quantum circuits.
//!
//! A matrix `M` given as a weighted sum of Pauli strings is either applied to
//! (`M|v0>`) or inverted against (`M^{-1}|v0>`) a state prepared by a circuit,
//! by minimizing an energy over a parameterized ansatz. The crate provides the
//! Pauli algebra, a statevector simulator, exact and sampled energy
//! estimators, fidelity checks, optimizers, time-evolution drivers and a
//! benchmark harness.

pub mod error;
pub mod pauli;
pub mod optimize;
pub mod problem;
pub mod sparse;
pub mod dense;
pub mod estimator;
pub mod statevec;
pub mod verify;
pub mod bench;
pub mod dynamics;
pub mod report;

pub use error::{Error, Result};
