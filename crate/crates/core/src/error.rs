use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error("truncated matrix payload: header declares {expected} values, found {found}")]
    Truncation { expected: usize, found: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("iterate became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("features are not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("row {row} of the feature matrix is zero but its budget is violated")]
    InfeasibleRow { row: usize },
    #[error("{lemma} violated: {counterexample}")]
    LemmaViolation { lemma: String, counterexample: String },
}

pub type Result<T> = std::result::Result<T, Error>;
