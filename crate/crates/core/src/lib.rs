//! Joint estimation of a phase and its phase diffusion on a two-level system.
//!
//! The crate is organised bottom-up:
//!
//! - [`qubit`]: 2×2 complex algebra, Pauli matrices, Bloch vectors and the
//!   dephasing channel that produces the probe state.
//! - [`weak`]: weak-measurement operators, the four-outcome POVM they induce,
//!   closed-form Fisher matrices and trade-off scans.
//! - [`theory`]: generic Fisher matrices, symmetric logarithmic derivatives,
//!   quantum Fisher information and Cramér-Rao bounds.
//! - [`sagnac`]: a Jones-calculus model of the Sagnac weak-measurement device
//!   with calibration scans and synthesized mixed states.
//! - [`estimator`]: multinomial sampling, maximum-likelihood and
//!   minimal-residual estimation, two-stage adaptive estimation and Monte
//!   Carlo covariance reports.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod optimize;
pub mod qubit;
pub mod sagnac;
pub mod theory;
pub mod weak;

pub use error::{Error, Result};
pub use qubit::{BlochVector, ComplexMatrix2, Pauli, QubitState};
pub use theory::{CovarianceBound, FisherMatrix, ParamPoint, QfiMatrix};
pub use weak::{Effect, MeasurementStrength, Povm};
