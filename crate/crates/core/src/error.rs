//! Crate-wide error type.

use thiserror::Error;

use crate::mcsvm::TrainOutcome;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability `{name}` must lie strictly inside (0, 1), got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset must contain at least one point")]
    EmptyDataset,

    #[error("label must be +1 or -1, got {0}")]
    InvalidLabel(f64),

    #[error("dataset contains a non-finite coordinate")]
    NonFiniteData,

    #[error("dataset has no {0} points")]
    MissingClass(&'static str),

    #[error("split fraction at index {index} yields an empty part for n = {n}")]
    EmptySplitPart { index: usize, n: usize },

    #[error(
        "calibration set too small: no r >= 1 has BinomialCdf(r-1; {n_c}, {epsilon}) <= {delta}"
    )]
    CalibrationTooSmall { n_c: usize, epsilon: f64, delta: f64 },

    #[error("order-statistic rank {rank} out of range [1, {len}]")]
    RankOutOfRange { rank: usize, len: usize },

    #[error("kernel specifications of the two models differ")]
    KernelMismatch,

    #[error("block index {block} out of range for {blocks} cost weights")]
    BlockOutOfRange { block: usize, blocks: usize },

    #[error("solver did not converge after {passes} passes (KKT violation {violation:.3e})")]
    NonConvergence {
        /// Best iterate reached before giving up.
        best: Box<TrainOutcome>,
        passes: usize,
        violation: f64,
    },

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Validates that a probability-like argument lies strictly inside (0, 1).
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::ProbabilityOutOfRange { name, value })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
