use thiserror::Error;

/// Failures of the embedded simplex. None of these should occur for a valid
/// instance; they are surfaced rather than panicking.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("internal error: LP reported infeasible ({0})")]
    Infeasible(String),
    #[error("internal error: LP reported unbounded (entering variable {0})")]
    Unbounded(usize),
    #[error("pivot limit of {0} reached without optimality")]
    PivotLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rate lambda[{index}] = {value} must be strictly positive")]
    NonPositiveRate { index: usize, value: f64 },

    #[error("rate lambda[{index}] = {value} outside box [{lower}, {upper}]")]
    OutOfBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("rho ladder exceeded cap {cap} at outer iteration {iteration} (g_prev = {g_prev}, last g = {g_last})")]
    RhoCapExceeded {
        cap: f64,
        iteration: usize,
        g_prev: f64,
        g_last: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad inputs, as opposed to numerical trouble.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Solver(_) | Error::RhoCapExceeded { .. })
    }
}
