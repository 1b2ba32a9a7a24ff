use thiserror::Error;

/// Errors produced by grid construction, time-plan setup, and the solvers.
#[derive(Debug, Error)]
pub enum MfwhError {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("problem definition error: {0}")]
    Problem(String),

    #[error("time plan error: {0}")]
    Plan(String),

    #[error("filter error: {0}")]
    Filter(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("singular Helmholtz system: omega = {omega} is at or near the discrete resonance lambda = {nearest_lambda}")]
    Resonance { omega: f64, nearest_lambda: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("config error: key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MfwhError>;
