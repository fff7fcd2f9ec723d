use thiserror::Error;

/// Errors produced by system evaluation, model construction, integration and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("state outside the model domain: {0}")]
    Domain(String),

    #[error("degenerate index {index}: |component| = {value:e} is below the floor {floor:e}")]
    DegenerateIndex { index: usize, value: f64, floor: f64 },

    #[error("compatibility condition violated: residual {residual:e} exceeds {tol:e}")]
    CompatibilityViolation { residual: f64, tol: f64 },

    #[error("requested rank {requested} exceeds numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("solver failure at t = {last_time}: {reason}")]
    SolverFailure { last_time: f64, reason: String },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("dense tensor of dimension {0} exceeds the oracle limit of 64")]
    TooLarge(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("plotting failed: {0}")]
    Plot(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::SolverFailure { .. })
    }
}
