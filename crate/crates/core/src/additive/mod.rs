//! Additive models under a Gaussian copula: design sampling, the spectral
//! compatibility bound and the variance sandwich.

mod compat;
mod design;
mod sandwich;

pub use compat::{
    empirical_phi_star, quantile_standardize, BasisSpec, CompatibilityQuery, PhiOptions, PhiReport, RANK_TOL,
};
pub use design::{copula_bound, sample_design, sample_latent, CopulaBound, CopulaDesign, SAMPLE_BLOCK};
pub use sandwich::{sandwich_check, SandwichOptions, SandwichReport, SANDWICH_Z};
