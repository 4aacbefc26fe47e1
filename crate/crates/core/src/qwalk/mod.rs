//! Exact finite-dimensional simulation of quantum walks on reversible
//! chains: walk operators and their spectra, phase-estimation reflectors,
//! π/3 amplification, annealing-state evolution and non-destructive
//! rounding.

pub mod amplify;
pub mod anneal;
pub mod chain;
pub mod evolve;
pub mod gap;
pub mod grid;
pub mod reflector;
pub mod rounding;
pub mod walk;

pub use chain::DiscreteChain;
pub use walk::{WalkOperator, WalkVariant};
