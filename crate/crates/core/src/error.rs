use thiserror::Error;

/// Errors raised by the completion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("requested rank {rank} exceeds matrix dimensions {n_rows}x{n_cols}")]
    RankTooLarge {
        rank: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("SVD backend did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("nonzero entry ({row}, {col}) meets a zero leverage score")]
    InfiniteWeight { row: usize, col: usize },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("infeasible budget: requested {requested} entries but only {available} are eligible")]
    InfeasibleBudget { requested: usize, available: usize },

    #[error("operator dimension {n} exceeds the configured cap {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("hard-instance construction failed: {0}")]
    Construction(String),

    #[error("location invariance violated: {0}")]
    LocationInvariance(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::Dimension {
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }
}
