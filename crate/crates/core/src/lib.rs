//! Thermometry with a driven dissipative Kerr resonator.
//!
//! The resonator is evolved under a Lindblad master equation in a truncated
//! Fock basis. Thermalization is tracked through the Uhlmann–Jozsa fidelity to
//! Gibbs states, and the precision of estimating the reservoir occupation
//! `n_th` is quantified by quantum and classical (homodyne, heterodyne)
//! Fisher information.

pub mod dynamics;
pub mod estimation;
pub mod error;
pub mod fidelity;
pub mod fock;
pub mod linalg;
pub mod measurement;
pub mod spectral;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
