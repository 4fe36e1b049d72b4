//! Simulation of monitored non-Markovian open quantum systems.
//!
//! The bath is a one-directional field. The finite stretch of field that still
//! interacts with the system forms a *memory* lattice of `N` time bins. System
//! plus memory evolve as a Markovian collision model. Each bin leaves the
//! memory after its last collision and can then be heterodyne-measured
//! without disturbing the system.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hilbert;

pub use error::{Error, Result};
pub mod kernel;
pub mod lattice;
pub mod monitor;
pub mod rng;
mod textio;

#[cfg(test)]
mod testutil;
