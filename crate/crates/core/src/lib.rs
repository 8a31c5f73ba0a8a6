//! Gridless delay estimation and spectrum reconstruction for quadrature
//! compressive sampling (QuadCS) of pulsed radar echoes.
//!
//! The measurement chain lives in [`signal_model`] and [`operator`]; the estimator
//! is split across [`beamspace`], [`interpolation`] and [`glsr`]; [`omp`] holds
//! the on-grid baseline and [`experiments`] the Monte Carlo harness.

pub mod error;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, C64};
pub mod beamspace;
pub mod experiments;
pub mod glsr;
pub mod interpolation;
pub mod omp;
pub mod operator;
pub mod signal_model;
