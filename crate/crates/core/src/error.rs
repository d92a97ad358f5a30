use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("not a correlation matrix: {0}")]
    NotCorrelation(String),

    #[error("weight matrix has a negative entry {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel grid is not symmetric at ({row}, {col})")]
    AsymmetricKernel { row: usize, col: usize },

    #[error("kernel is singular at the origin (s = {s}, t = {t})")]
    SingularKernel { s: f64, t: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("variable {index} is degenerate (a single support point carries all mass)")]
    DegenerateVariable { index: usize },

    #[error("expansion for variable {index} has zero norm")]
    ZeroNorm { index: usize },

    #[error("coefficient overflow at order {order}")]
    CoefficientOverflow { order: usize },

    #[error("function is not symmetric: f{a:?} != f{b:?}")]
    Asymmetric { a: Vec<usize>, b: Vec<usize> },

    #[error("enumeration budget exceeded: {required} atoms > {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("t = {t} rejected: {reason}")]
    InvalidT { t: f64, reason: String },

    #[error("tail bound diverges: {0}")]
    DivergentTail(String),

    #[error("frequency {omega} outside [-pi, pi] for a lattice kernel")]
    FrequencyOutOfRange { omega: f64 },

    #[error("cone constraint cannot be satisfied: {0}")]
    DegenerateCone(String),

    #[error("did not converge within {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
