use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit failed: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    FitFailure {
        residual: f64,
        tolerance: f64,
        best: Vec<crate::corrlib::ExpTerm>,
    },

    #[error("degenerate poles: {0}")]
    DegeneratePole(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("unsupported superoperator term: {0}")]
    UnsupportedTerm(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step size underflow at t = {t}")]
    Stiffness { t: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
