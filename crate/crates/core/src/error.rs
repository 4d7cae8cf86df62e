use thiserror::Error;

/// Errors raised by grid construction, operators, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "nonlinear solver failed after {iterations} iterations (residual {residual:.3e}): {detail}"
    )]
    SolverFailed {
        iterations: usize,
        residual: f64,
        detail: String,
        history: Vec<f64>,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("level m = {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated at step {step}: {detail}")]
    Invariant { step: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
