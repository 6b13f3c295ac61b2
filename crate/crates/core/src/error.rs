use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("argument {value} outside supported range: {reason}")]
    Range { value: f64, reason: String },

    #[error("kernel is not stable: spectral radius {rho} >= 1")]
    Unstable { rho: f64 },

    #[error("admissibility condition violated: {name} ({detail})")]
    Precondition { name: String, detail: String },

    #[error("assumption check failed: {}", .0.join("; "))]
    Assumption(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
