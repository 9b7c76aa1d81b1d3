use std::path::PathBuf;

use thiserror::Error;

/// Broad grouping of failures, used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters supplied by the caller.
    Usage,
    /// Reading or writing files, or malformed file contents.
    Io,
    /// A numerical routine could not produce a valid result.
    Numeric,
    /// Not enough samples or classes to carry out the request.
    InsufficientData,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has (near) zero Euclidean norm")]
    ZeroColumn(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("eigen solver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("only {available} of {requested} requested directions carry positive weight")]
    RankDeficient { requested: usize, available: usize },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("feature matrix must have at least one row")]
    EmptyMatrix,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} domain has no samples")]
    EmptyDomain(&'static str),

    #[error("label {label} at position {index} is outside 0..{classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("class {0} has no labelled samples in either domain")]
    MissingClass(usize),

    #[error("columns of the {0} feature matrix are not l2-normalised")]
    NotNormalized(&'static str),

    #[error("ratio denominator {0:.3e} is too small")]
    DegenerateRatio(f64),

    #[error("class {0} has no support")]
    EmptyClass(usize),

    #[error("no class means available for prediction")]
    NoClasses,

    #[error("class {class} needs {needed} samples but only {available} are available")]
    InsufficientSamples {
        class: usize,
        needed: usize,
        available: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: line {line} has a different number of columns than line 1")]
    RaggedRows { path: PathBuf, line: usize },

    #[error("{path}: non-finite value at line {line}, column {column}")]
    NonFinite {
        path: PathBuf,
        line: usize,
        column: usize,
    },

    #[error("{path}: negative label at line {line}")]
    NegativeLabel { path: PathBuf, line: usize },

    #[error("{path}: unsupported report version {found} (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InvalidConfig(_) => ErrorKind::Usage,
            Io { .. }
            | Parse { .. }
            | RaggedRows { .. }
            | NonFinite { .. }
            | NegativeLabel { .. }
            | VersionMismatch { .. }
            | Format { .. } => ErrorKind::Io,
            ZeroColumn(_)
            | DimensionMismatch(_)
            | NotSymmetric(_)
            | NotPositiveDefinite(_)
            | NoConvergence(_)
            | RankDeficient { .. }
            | NonFiniteEntry { .. }
            | EmptyMatrix
            | NotNormalized(_)
            | DegenerateRatio(_)
            | LabelOutOfRange { .. } => ErrorKind::Numeric,
            EmptyDomain(_)
            | MissingClass(_)
            | EmptyClass(_)
            | NoClasses
            | InsufficientSamples { .. } => ErrorKind::InsufficientData,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
