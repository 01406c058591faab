use std::path::PathBuf;

use thiserror::Error;

use crate::calibrate::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A value violates a type invariant. `line` is set when the value came from a file.
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { line: Option<u64>, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("no admissible windows")]
    NoAdmissibleWindows,

    #[error("degenerate window: design matrix condition number {condition:.3e}")]
    DegenerateWindow { condition: f64 },

    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Fewer than three usable critical-time samples. The fits that were
    /// computed are kept for inspection.
    #[error("insufficient ensemble: {usable} usable critical-time estimates from {} windows", fits.len())]
    InsufficientEnsemble { usable: usize, fits: Vec<FitResult> },

    #[error("insufficient overlap: {0}")]
    InsufficientOverlap(String),

    #[error("undefined correlation at step {step_days} days: zero-variance increments")]
    UndefinedCorrelation { step_days: u32 },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }
}
