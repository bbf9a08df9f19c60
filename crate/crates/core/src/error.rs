use thiserror::Error;

/// Errors shared by every stage of the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point {0} lies in the hull")]
    PointInHull(String),
    #[error("time {0} outside the chain's span")]
    TimeOutOfRange(f64),
    #[error("trace unresolved at t = {0}")]
    TraceUnresolved(f64),
    #[error("diagonal singularity: kernel evaluated at z = w")]
    DiagonalSingularity,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("covariance model error: {0}")]
    Model(String),
    #[error("schedule too coarse: last estimates differ by {0:.3e}")]
    ScheduleTooCoarse(f64),
    #[error("parameter outside the subcritical range: {0}")]
    Subcritical(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
