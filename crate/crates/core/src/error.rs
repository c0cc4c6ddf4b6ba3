use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not connected")]
    NotConnected,

    #[error("no synchronous state: {0}")]
    NoSynchronousState(String),

    #[error("synchronous state violates the security condition |δi − δj| < π/2 on lines {lines:?}")]
    InsecureState { lines: Vec<usize> },

    #[error("no equilibrium: |P| = {power} must be below K = {capacity}")]
    NoEquilibrium { power: f64, capacity: f64 },

    #[error("system matrix is not Hurwitz (max real part of spectrum = {max_real:e})")]
    NotHurwitz { max_real: f64 },

    #[error("assumption violated [{assumption}]: {detail}")]
    AssumptionViolated {
        assumption: &'static str,
        detail: String,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integration blew up after {step} steps of dt = {dt} (state norm {norm:e}); use a smaller dt")]
    StepSize { step: usize, dt: f64, norm: f64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn assumption(assumption: &'static str, detail: impl Into<String>) -> Self {
        Error::AssumptionViolated {
            assumption,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by the model inputs rather than by the
    /// implementation: violated modelling assumptions, bad files, or
    /// preconditions of a requested method.
    pub fn is_assumption_violation(&self) -> bool {
        !matches!(self, Error::Numerical(_) | Error::Io(_))
    }
}
