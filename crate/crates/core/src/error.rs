use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "dual solver failed in cell {cell} ({problem}): {reason} after {iterations} iterations, residual {residual:e}"
    )]
    SolverFailure {
        cell: usize,
        problem: &'static str,
        reason: String,
        iterations: usize,
        residual: f64,
    },

    #[error("time step underflow at t = {time:e}: dt {dt:e} fell below {floor:e} while restoring positivity")]
    TimeStepUnderflow { time: f64, dt: f64, floor: f64 },

    #[error("vacuum state in exact Riemann solution")]
    RiemannVacuum,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attach a cell index to a solver failure raised without one.
    pub(crate) fn in_cell(self, index: usize) -> Self {
        match self {
            Error::SolverFailure {
                problem,
                reason,
                iterations,
                residual,
                ..
            } => Error::SolverFailure {
                cell: index,
                problem,
                reason,
                iterations,
                residual,
            },
            other => other,
        }
    }
}
