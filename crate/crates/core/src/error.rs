//! Error taxonomy shared by the analytic and Monte Carlo layers.

use thiserror::Error;

/// Unified error type for the library.
///
/// The variants map onto the process exit codes used by the CLI:
/// configuration problems exit with 2, numerical failures with 3, and
/// validation failures with 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative kernel (series, continued fraction) failed to converge.
    #[error("{what} failed to converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error(
        "quadrature tolerance not met: best estimate {value:.17e}, \
         achieved error {achieved:.3e}, requested {requested:.3e}"
    )]
    ToleranceNotMet {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    /// A conditional quantity was requested where the conditioning event
    /// has probability zero (e.g. D2D-mode coverage with zero hit rate).
    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),

    /// Estimation was requested with too few samples for a meaningful CI.
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: u64, need: u64 },

    /// Configuration file or profile problems.
    #[error("config error: {0}")]
    Config(String),

    /// Unknown registry key (selection scheme, profile name, ...).
    #[error("unknown {kind} {name:?}; known: {known}")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownName { .. } => 2,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
