//! Weighted maximal correlation of discrete joints: exact extremes via a
//! whitened block eigenproblem and an alternating-conditional-expectations
//! estimator for samples.

mod ace;
mod joint;
mod oracle;

pub use ace::{ace_estimate, ace_on_joint, empirical_joint, quantile_bins, samples_from_csv, AceOptions, AceReport};
pub use joint::{AtomJson, DiscreteJoint, JointJson, Label, MASS_TOL};
pub use oracle::{
    exact_extremes, oracle_matrix, pair_max_corr, rayleigh_ratio, BlockFunctionVector, Extreme, ExtremeResult,
    ZERO_BLOCK_TOL,
};
