//! Dynamical low-rank approximation of random parabolic problems.

pub mod dlr;
pub mod error;
pub mod fem;
pub mod integrators;
pub mod linalg;
pub mod stochastic;

pub use error::{DlrError, Result};
