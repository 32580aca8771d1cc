use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("index out of contract: s={s} > t={t}")]
    LowerTriangle { s: usize, t: usize },

    #[error("index out of range: {index} >= {n_points}")]
    OutOfRange { index: usize, n_points: usize },

    #[error("negative increment at row {s}, column {t}: {value}")]
    NegativeIncrement { s: usize, t: usize, value: f64 },

    #[error("invariant violated at ({s}, {t}): {reason}")]
    Invariant { s: usize, t: usize, reason: String },

    #[error("singular diagonal at (u={u}, k={k}): 1 - w0*f(u,u) = {pivot:e}")]
    SingularDiagonal { u: usize, k: usize, pivot: f64 },

    #[error("series did not fall below tol={tol:e} within {max_terms} terms")]
    SeriesNotConverged { tol: f64, max_terms: usize },

    #[error("method {method} does not apply here: {reason}")]
    InvalidMethod { method: String, reason: String },

    #[error("no observed renewals (cumulative count is zero)")]
    NoRenewals,

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}:{line}: claim references unknown policy_id '{policy_id}'")]
    UnknownPolicy {
        path: PathBuf,
        line: u64,
        policy_id: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
