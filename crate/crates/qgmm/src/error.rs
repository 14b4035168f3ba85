//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by model construction, sampling, diagnostics, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// ZᵀX (or another required cross-product) is not invertible.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// Invalid configuration or argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Observation index outside `0..n`.
    #[error("observation index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    /// The moment covariance V(θ) could not be factored even after jitter
    /// escalation; the caller treats the corresponding θ as log-target −∞.
    #[error("moment covariance not factorizable after jitter escalation")]
    SingularWeighting,

    /// The proposal precision (Υ+Q or Υ) could not be factored; counted as a
    /// rejection by the samplers.
    #[error("proposal precision not factorizable")]
    ProposalSingular,

    /// Too few retained draws for the batch-means estimator.
    #[error("need at least {min} draws for diagnostics, got {got}")]
    TooFewDraws { got: usize, min: usize },

    /// Sample or batch-means covariance of the draws is not positive definite.
    #[error("covariance of draws is singular")]
    SingularCovariance,

    /// mESS exceeded the 1.5·m sanity bound, indicating a numerical fault.
    #[error("mESS {mess:.1} exceeds sanity bound 1.5 x {m} retained draws")]
    SuperEfficient { mess: f64, m: usize },

    /// The chain could not start or spent essentially all steps in singular
    /// branches.
    #[error("degenerate chain: {0}")]
    ChainDegenerate(String),

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    /// A column named in the mapping is absent from the CSV header.
    #[error("column {0:?} not present in file header")]
    HeaderMismatch(String),

    /// A mapped cell failed to parse as a decimal number (row is 1-based,
    /// counting data rows after the header).
    #[error("row {row}, column {column:?}: cell {value:?} is not numeric")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
