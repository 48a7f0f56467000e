use thiserror::Error;

use crate::linalg::SolveReport;
use crate::schemes::RunReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at node ({i1}, {i2})")]
    NonFinite { i1: usize, i2: usize, value: f64 },

    #[error("velocity boundary face {0} is not zero")]
    NonZeroBoundaryFace(String),

    #[error("{method} did not converge: {iterations} iterations, relative residual {residual:.3e}", method = .0.method, iterations = .0.iterations, residual = .0.residual_norm)]
    NotConverged(SolveReport),

    #[error("{method} broke down after {iterations} iterations", method = .0.method, iterations = .0.iterations)]
    Breakdown(SolveReport),

    #[error("singular matrix (zero pivot in column {0})")]
    Singular(usize),

    #[error("dense size {n} exceeds cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
        partial: Box<RunReport>,
    },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigInvalid(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
