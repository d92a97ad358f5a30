//! Bounds and exact computations for the extreme eigenvalues of nonlinear
//! correlation matrices.
//!
//! The crate is organized by problem family:
//!
//! - [`spectra`]: Schur products, spectra and kernel discretization.
//! - [`hermite`]: Hermite expansions and nonlinear Gram matrices of Gaussian
//!   vectors.
//! - [`maxcorr`]: exact and estimated weighted maximal correlations of
//!   discrete joints.
//! - [`groups`]: sums of i.i.d. variables over set systems.
//! - [`stationary`]: spectral densities of stationary kernels.
//! - [`additive`]: compatibility constants for additive models under a
//!   Gaussian copula.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod additive;
pub mod error;
pub mod groups;
pub mod hermite;
pub mod maxcorr;
pub mod rng;
pub mod spectra;
pub mod stationary;
pub mod transform;

pub use error::{Error, Result};
pub use spectra::{CorrMatrix, SymMatrix, WeightMatrix};
