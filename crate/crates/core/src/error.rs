use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or invalid input data or configuration.
    Input,
    /// A numerical routine failed or the data is degenerate.
    Numerical,
    /// Filesystem or stream failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv parse error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("duplicate stock id {id:?} at column {column}")]
    DuplicateStock { id: String, column: usize },

    #[error("non-positive price at ({row},{column}): {value}")]
    NonPositivePrice { row: usize, column: usize, value: f64 },

    #[error("non-numeric price at ({row},{column}): {text:?}")]
    NonNumericPrice { row: usize, column: usize, text: String },

    #[error("dates not strictly increasing at row {row}: {previous:?} then {current:?}")]
    DatesNotIncreasing { row: usize, previous: String, current: String },

    #[error("ragged row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("panel too small: need at least {min_stocks} stocks and {min_days} price days, got {stocks} x {days}")]
    PanelTooSmall { stocks: usize, days: usize, min_stocks: usize, min_days: usize },

    #[error("zero variance for stock {0:?}")]
    ZeroVariance(String),

    #[error("sector map: {0}")]
    Sectors(String),

    #[error("day index {t} out of range 1..={max}")]
    DayOutOfRange { t: usize, max: usize },

    #[error("series too short: need at least {min} points, got {len}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("series has {missing} undefined entries out of {len} (more than 10%)")]
    TooManyGaps { missing: usize, len: usize },

    #[error("series has undefined entries")]
    UndefinedEntries,

    #[error("scale {scale} outside [4, {max}]")]
    ScaleOutOfRange { scale: usize, max: usize },

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("no included nodes: every degree series has zero variance")]
    AllZeroVariance,

    #[error("eigendecomposition did not converge (n = {n}, max |entry| = {max_abs}, diagonal range [{diag_min}, {diag_max}])")]
    EigenNoConvergence { n: usize, max_abs: f64, diag_min: f64, diag_max: f64 },

    #[error("invalid market spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::AllZeroVariance
            | Error::EigenNoConvergence { .. }
            | Error::InsufficientPoints(_)
            | Error::TooManyGaps { .. } => ErrorClass::Numerical,
            Error::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
