use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum AdvError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is rank deficient (numerical rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },
    #[error("attack norm {0:?} is not supported by this routine")]
    UnsupportedAttack(crate::NormKind),
    #[error("linear system could not be factorized: {0}")]
    Factorization(&'static str),
    #[error("solver failed to converge: {0}")]
    NonConvergence(String),
    #[error("csv error at {location}: {message}")]
    Csv { location: String, message: String },
    #[error("non-numeric value '{value}' at row {row}, column '{column}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AdvError>;
