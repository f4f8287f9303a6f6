use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("operation requires setup {expected}")]
    WrongSetup { expected: &'static str },

    #[error("drift matrix is not Hurwitz (margin {margin:.6e} rad/s)")]
    UnstableSystem { margin: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("matrix is not positive definite")]
    NonPositiveDefinite,

    #[error("spectral tail carries {fraction:.3} of the integral")]
    TailDominated { fraction: f64 },

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("polariton energy is complex (radicand {radicand:.6e})")]
    ComplexMode { radicand: f64 },

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("reconstructed occupation {value:.6e} is negative")]
    NegativeOccupation { value: f64 },

    #[error("time step {dt:.3e} s exceeds stability limit {limit:.3e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("Jacobian is singular at the current parameters")]
    SingularJacobian,

    #[error("sideband window [{lo}, {hi}] Hz lies outside the data range")]
    WindowOutOfRange { lo: f64, hi: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("config key `{key}` (line {line}): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
