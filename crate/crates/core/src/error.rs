use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
///
/// Variants are grouped by the stage that raises them; [`Error::kind`] folds
/// them into the coarse categories the CLI maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // numerics
    #[error("zero-norm vector{}", fmt_row(*.row))]
    ZeroNorm { row: Option<usize> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("backward requires a scalar loss, got shape {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("non-finite value detected in {0}")]
    NonFinite(String),

    // encoders
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("caption is empty after trimming")]
    EmptyCaption,

    // vcd
    #[error("vocabulary is empty")]
    EmptyVocab,
    #[error("phrase is empty")]
    EmptyPhrase,

    // train
    #[error("similarity matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("insufficient data: {available} pairs available, batch size is {required}")]
    InsufficientData { available: usize, required: usize },

    // eval
    #[error("index {index} out of range for gallery of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown caption `{0}`")]
    UnknownCaption(String),

    // ingest
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dangling reference to `{0}`")]
    DanglingReference(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("truncated file: {0}")]
    TruncatedFile(&'static str),
    #[error("shape overflow: {0}")]
    ShapeOverflow(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_row(row: Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

/// Coarse failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller supplied an invalid argument or configuration.
    Usage,
    /// Input data is malformed, inconsistent or unreadable.
    Data,
    /// A numeric computation produced NaN/Inf or hit a degenerate input.
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_)
            | Error::InsufficientData { .. }
            | Error::NonPositiveTemperature(_) => ErrorKind::Usage,
            Error::NonFinite(_) | Error::ZeroNorm { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
