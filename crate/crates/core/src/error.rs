use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid structure constants: {0}")]
    InvalidAlgebra(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("coordinate singularity: {0}")]
    Singularity(String),

    #[error("non-finite state at t = {t}")]
    Divergence { t: f64 },

    #[error("{diverged} of {total} trajectories diverged (budget {budget})")]
    DivergenceBudget {
        diverged: usize,
        total: usize,
        budget: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter pole: {0}")]
    ParameterPole(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("no convergence after t = {t_reached}: last residual {last_residual:e}")]
    NotConverged {
        t_reached: f64,
        last_residual: f64,
        history: Vec<(f64, f64)>,
    },

    #[error("empty histogram")]
    EmptyHistogram,
}

pub type Result<T> = std::result::Result<T, Error>;
