use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. `code()` gives the stable
/// machine-readable identifier used by the CLI and the record store.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),
    #[error("singular evaluation: {0}")]
    Singularity(String),
    #[error("invalid boundary parameters: {0}")]
    InvalidBoundary(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {message} (intervals={intervals}, evals={evals}, estimate={estimate:e}, error={error:e})")]
    Numerical {
        message: String,
        intervals: usize,
        evals: usize,
        estimate: f64,
        error: f64,
    },
    #[error("euler step {0} exceeds the 0.1 limit")]
    StepTooLarge(f64),
    #[error("paths do not share a horizon: {0} vs {1}")]
    MismatchedHorizon(f64, f64),
    #[error("convolution box too large: {0} cells")]
    BoxOverflow(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown {kind} id \"{id}\"")]
    UnknownId { kind: &'static str, id: String },
    #[error("store: {0}")]
    Store(String),
    #[error("empty store for filter \"{0}\"")]
    EmptyStore(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidPoint(_) => "invalid_point",
            Error::Contract(_) => "contract",
            Error::UnsupportedSpace(_) => "unsupported_space",
            Error::Singularity(_) => "singularity",
            Error::InvalidBoundary(_) => "invalid_boundary",
            Error::Domain(_) => "domain",
            Error::Numerical { .. } => "numerical",
            Error::StepTooLarge(_) => "step_too_large",
            Error::MismatchedHorizon(..) => "mismatched_horizon",
            Error::BoxOverflow(_) => "box_overflow",
            Error::Parse { .. } => "parse",
            Error::UnknownId { .. } => "unknown_id",
            Error::Store(_) => "store",
            Error::EmptyStore(_) => "empty_store",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Store(e.to_string())
    }
}
