//! Finite-time state transfer in a quartic double well: spin-basis
//! Hamiltonians, counter-diabatic driving, open-system propagation and
//! protocol grading.

pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod lz;
pub mod metrics;
pub mod model;
pub mod operator;
pub mod phasespace;
pub mod runner;
pub mod spinbasis;
pub mod sta;
pub mod tridiag;

pub use error::{Error, Result};
