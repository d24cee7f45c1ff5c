//! Numerical laboratory for limit theorems of Toeplitz-type quadratic
//! functionals `Q_T(t)` of continuous-time stationary Gaussian processes
//! with possibly long-range dependence.
//!
//! The crate simulates the underlying process from its spectral density,
//! evaluates the quadratic functional along a time grid, applies the central
//! and non-central normalizations, simulates the second-chaos limit process,
//! and statistically verifies the limit statements by Monte Carlo.

pub mod config;
pub mod error;
pub mod limit;
pub mod mc;
pub mod output;
pub mod quadform;
pub mod quadrature;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
