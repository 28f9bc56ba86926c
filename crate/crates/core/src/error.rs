use thiserror::Error;

use crate::signal::UnitTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("signal is empty or has fewer than the required samples")]
    EmptySignal,

    #[error("timestamps are not strictly increasing at sample {index}")]
    NonMonotonicTime { index: usize },

    #[error("signal has {len} samples, at least {min} are required")]
    SignalTooShort { len: usize, min: usize },

    #[error("normalization scales must be finite and strictly positive, got ({0}, {1}, {2})")]
    InvalidNormalization(f64, f64, f64),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("unit mismatch: expected {expected}, found {found}")]
    UnitMismatch { expected: UnitTag, found: UnitTag },

    #[error("format error on line {line}: {message}")]
    FormatError { line: usize, message: String },

    #[error("parse error on line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("event at {0} s lies outside the logged time span")]
    EventOutOfRange(f64),

    #[error("labels contain a single class; both 0 and 1 are required to fit")]
    DegenerateLabels,

    #[error("dataset has {n} rows, at least {min} are required to fit")]
    InsufficientData { n: usize, min: usize },

    #[error(
        "complete separation detected (coefficient norm {norm:.3e}); refit with a positive ridge"
    )]
    SeparationDetected { norm: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("trip profile has no segments")]
    EmptyProfile,

    #[error("nothing to report")]
    EmptyReport,

    #[error("duplicate line id {0:?}")]
    DuplicateLine(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown line {0:?}")]
    UnknownLine(String),
}
