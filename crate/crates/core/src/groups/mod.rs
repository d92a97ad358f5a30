//! Sums of i.i.d. variables over set systems: nested-sum and group
//! correlation matrices, symmetric extremes, the shadow-group condition,
//! Hoeffding decompositions and the functions that attain the bounds.

mod hoeffding;
mod law;
mod sin;
mod system;

pub use hoeffding::{
    elementary_symmetric, hoeffding_decompose, product_basis, product_basis_covariance, standardize, tabulate,
    HoeffdingDecomposition, TABLE_TOL,
};
pub use law::{DiscreteLaw, Law};
pub use sin::{sin_construction_corr, solve_ct, SinCorr, SinMethod, SinOptions};
pub use system::{
    assumption_c_check, binomial, extreme_symm, group_matrix, nested_sum_matrix, sums_joint, verify_witness,
    AssumptionCReport, AssumptionCStatus, EllMatrix, GroupSystem, OrderSpectrum, SymmExtremes, ARGMIN_TIE_TOL,
    ENUMERATION_BUDGET, SEARCH_NODE_BUDGET,
};
