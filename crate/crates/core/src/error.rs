use thiserror::Error;

use crate::bounds::BoundsReport;
use crate::calibration::PairCalibration;
use crate::marginals::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid marginal specification: {0}")]
    InvalidSpec(ValidationReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate margin: {0}")]
    Degenerate(String),

    #[error("truncation did not terminate below the cap of {cap} support points")]
    TruncationCap { cap: u64 },

    #[error("moment estimation failed: {0}")]
    Estimation(String),

    #[error("target correlation outside the feasible region for {}", .0.infeasible_labels())]
    Infeasible(Box<BoundsReport>),

    #[error("root not bracketed: {0}")]
    NotBracketed(String),

    #[error("calibration of pair ({}, {}) did not converge after {} iterations", .pair.0 + 1, .pair.1 + 1, .report.iterations)]
    NotConverged {
        pair: (usize, usize),
        report: Box<PairCalibration>,
    },

    #[error("correlation matrix repair failed: {0}")]
    Repair(String),

    #[error("bootstrap degenerate: {0}")]
    Bootstrap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Domain failures (validation, feasibility, convergence) as opposed to
    /// malformed input or I/O.
    pub fn is_domain(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_) | Error::Csv(_))
    }
}
