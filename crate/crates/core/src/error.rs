use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode surfaced by the toolkit.
///
/// Variants are grouped by the exit-code families of the command-line driver:
/// parse failures, validation failures, alignment/integrity failures, and
/// capacity/usage failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("calibration does not cover {0}")]
    Coverage(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("optimizer did not converge after {evaluations} evaluations (best theta={best_theta}, phi={best_phi}, objective={best_objective})")]
    Convergence {
        best_theta: f64,
        best_phi: f64,
        best_objective: f64,
        evaluations: usize,
    },

    #[error("circuit is not factorizable across the cut: {0}")]
    NotFactorizable(String),

    #[error("distribution not normalized: total {0}")]
    NotNormalized(f64),

    #[error("no probability for bitstring {0}")]
    MissingProbability(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation error at {location}: {message}")]
    Validation { location: String, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("missing response: {0}")]
    MissingResponse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code for this error: 2 parse, 3 validation, 4 alignment,
    /// 64 usage, 65 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::Validation { .. }
            | Error::Coverage(_)
            | Error::InvalidCut(_)
            | Error::NotFactorizable(_)
            | Error::NotNormalized(_)
            | Error::InsufficientData(_)
            | Error::Convergence { .. } => 3,
            Error::Alignment(_)
            | Error::MissingProbability(_)
            | Error::Integrity(_)
            | Error::MissingResponse(_)
            | Error::Io { .. } => 4,
            Error::InvalidArgument(_) => 64,
            Error::Capacity(_) => 65,
        }
    }
}
