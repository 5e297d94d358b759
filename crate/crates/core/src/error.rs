use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-stationary AR(1) coefficient {phi} at interval {interval}")]
    NonStationary { interval: usize, phi: f64 },

    #[error(
        "correlation matrix is not positive semidefinite: eigenvalue {value:e} (index {index})"
    )]
    NotPositiveSemidefinite { index: usize, value: f64 },

    #[error("interval-of-day group {interval} has {count} observations, need at least 2")]
    SparseGroup { interval: usize, count: usize },

    #[error("series too short: {len} samples, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("fixed point not reached after {iterations} iterations (residuals {residuals:?})")]
    NoConvergence {
        iterations: usize,
        residuals: [f64; 4],
    },

    #[error("target success rate {target} never attained (max achieved {max_rate})")]
    TargetNotAttained { target: f64, max_rate: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(
        "no feasible MAC configuration in bounds (best achieved probability {best_probability:.6})"
    )]
    NoFeasibleConfig { best_probability: f64 },

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
