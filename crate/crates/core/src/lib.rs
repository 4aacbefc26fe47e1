//! Approximately-convex optimization by simulated annealing over hit-and-run
//! walks, an exact finite-dimensional simulator of the quantum-walk
//! machinery that accelerates it, and a stochastic convex bandit harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealing;
pub mod bandit;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hitrun;
pub mod ledger;
pub mod meanest;
pub mod oracle;
pub mod qwalk;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
