use thiserror::Error;

/// Errors produced by the path tracker, diagnostics and simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("column {column} has (near) zero norm and cannot be standardized")]
    ZeroColumn { column: usize },

    #[error("index set is empty")]
    EmptySubset,

    #[error("index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error(
        "exhaustive scan needs {subsets} subsets, over the budget of {budget}; use sampled mode"
    )]
    BudgetExceeded { subsets: u128, budget: u128 },

    #[error("design restricted to the requested set is rank deficient")]
    RankDeficient,

    #[error("penalty level {lambda} is below the path range (smallest reached: {min_lambda})")]
    BelowPathRange { lambda: f64, min_lambda: f64 },

    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("degrees of freedom {df} leave no residual degrees of freedom with n = {n}")]
    NoResidualDf { df: usize, n: usize },

    #[error("fold {fold} has no training rows")]
    EmptyFold { fold: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
