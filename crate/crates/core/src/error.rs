use thiserror::Error;

/// Errors raised by the library.
///
/// Flags that are not failures (series truncation, divergent thresholds,
/// below-threshold overlaps) are carried as booleans on result values instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("dimension {requested} exceeds the dense-matrix cap {cap}")]
    Allocation { requested: usize, cap: usize },

    #[error("no spectral gap: top value {top} is not separated from the bulk (next value {next})")]
    NoSpectralGap { top: f64, next: f64 },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("numerical blow-up at iteration {iteration}: normalized norm {norm:e}")]
    NumericalBlowup { iteration: usize, norm: f64 },

    #[error("covariance is not positive semidefinite (pivot {pivot:e} at index {index})")]
    Factorization { pivot: f64, index: usize },

    #[error("schema error: {0}")]
    Schema(String),

    /// `line` is 1-based; 0 when the problem is not tied to one line (flag overrides, missing sections).
    #[error("config error{}: {message}", at_line(*line))]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Param(msg.into())
}
