use thiserror::Error;

/// Errors raised across the library. Each variant maps to one [`ErrorKind`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GtError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole proximity: {0}")]
    Pole(String),
    #[error("singular density: {0}")]
    SingularDensity(String),
    #[error("singular kernel: {0}")]
    SingularKernel(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("precision insufficient: {0}")]
    Precision(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e}): {context}")]
    Convergence {
        iterations: usize,
        residual: f64,
        context: String,
    },
    #[error("flow error at tau = {tau}: {reason}")]
    Flow { tau: f64, reason: String },
    #[error("divergent log-energy: {0}")]
    Divergence(String),
    #[error("infeasible field at cell {cell}: {reason}")]
    Infeasible { cell: String, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inconclusive estimate: {0}")]
    Inconclusive(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Domain,
    Capacity,
    Precision,
    Convergence,
    Inconclusive,
    Io,
}

impl GtError {
    pub fn kind(&self) -> ErrorKind {
        use GtError::*;
        match self {
            InvalidInput(_) | Domain(_) | Pole(_) | SingularDensity(_) | SingularKernel(_)
            | Infeasible { .. } | Precondition(_) | Invariant(_) | Divergence(_)
            | Resolution(_) => ErrorKind::Domain,
            Capacity(_) => ErrorKind::Capacity,
            Precision(_) => ErrorKind::Precision,
            Convergence { .. } | Flow { .. } => ErrorKind::Convergence,
            Inconclusive(_) => ErrorKind::Inconclusive,
            Io(_) => ErrorKind::Io,
        }
    }
}

impl From<std::io::Error> for GtError {
    fn from(e: std::io::Error) -> Self {
        GtError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GtError {
    fn from(e: serde_json::Error) -> Self {
        GtError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GtError>;
