use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("missing scan orientation {0} degrees")]
    MissingOrientation(u16),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("singular system: {0}")]
    Singular(String),

    #[error(
        "optimizer did not converge after {restarts} restarts (best residual {best_residual:.6e})"
    )]
    NonConvergence {
        restarts: usize,
        best_residual: f64,
        best_params: Vec<f64>,
    },

    #[error("no fiducial target found: {0}")]
    NoFiducial(String),

    #[error("ambiguous fiducial target: {0}")]
    AmbiguousFiducial(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("grid file: {0}")]
    Format(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
