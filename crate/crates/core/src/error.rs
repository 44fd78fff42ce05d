use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sequence window of length {len} is too short for operator degree {degree}")]
    WindowTooShort { len: usize, degree: usize },

    #[error("operator is not in R_inf: monomial (q*)^{istar} q^{j} present")]
    NotInRInf { istar: u32, j: u32 },

    #[error("operator is not positive semi-definite: partial sum {value} < -{tol}")]
    NotPsd { value: f64, tol: f64 },

    #[error("operator is singular: partial sum {value} within {tol} of zero")]
    Singular { value: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no leaf edge found: the sparsity graph contains a cycle, so no tree factorisation exists")]
    NoLeafEdge,

    #[error("column {col} has {count} non-zero entries, expected one or two")]
    MalformedColumn { col: usize, count: usize },

    #[error("input too large: {0}")]
    TooLarge(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("factor is not of the form L0 + L1 q: {0}")]
    NotTwoTermShape(String),

    #[error("network is not a forest")]
    NotAForest,

    #[error("invalid discount factor {0}, expected 0 < r < 1")]
    InvalidDiscount(f64),

    #[error("value iteration did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("matrix is not positive definite")]
    Indefinite,

    #[error("invalid input: {0}")]
    Schema(String),

    #[error("factorisation self-check failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
