use std::path::PathBuf;

use thiserror::Error;

use crate::kernels::Group;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vertex {vertex} has no neighbors")]
    IsolatedVertex { vertex: usize },

    #[error("the {group} group is empty")]
    EmptyGroup { group: Group },

    #[error("design matrix is rank deficient (reciprocal condition number {rcond:.3e})")]
    SingularDesign { rcond: f64 },

    #[error("no kernel mass in the {group} window at the query point")]
    EmptyWindow { group: Group },

    #[error("all {n} points were trimmed; the estimate is undefined")]
    AllTrimmed { n: usize },

    #[error("adjustment function returned a non-finite value at unit {unit}")]
    InvalidAdjustment { unit: usize },

    #[error("covariate dimension {p} is outside the supported range 1..=10")]
    UnsupportedDimension { p: usize },

    #[error("variance estimate {0} is negative")]
    InvalidVariance(f64),

    #[error("quadrature did not converge: estimated error {error:.3e} > tolerance {tolerance:.3e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("eigensolver did not converge: max residual {residual:.3e}")]
    EigenConvergence { residual: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {kind} `{key}`")]
    UnknownKey { kind: &'static str, key: String },

    #[error("{failed} of {reps} replicates failed (first failure: {first})")]
    TooManyFailures {
        failed: usize,
        reps: usize,
        first: String,
    },

    #[error("missing data file {}: expected {format}", path.display())]
    MissingData { path: PathBuf, format: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
