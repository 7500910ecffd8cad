use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time series must contain at least one observation")]
    EmptyStream,
    #[error("non-finite value {value} at position {position}")]
    NonFinite { position: usize, value: f64 },
    #[error("streams have different lengths ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("shift index out of bounds: {index} not in [1, {len}]")]
    ShiftOutOfBounds { index: usize, len: usize },
    #[error("window exceeds stream: t={t}, delta={delta}, T={len}")]
    WindowOutOfRange { t: usize, delta: usize, len: usize },
    #[error("binary stream required")]
    NonBinary,
    #[error("single-event stream required (found {found} events)")]
    NotSingleEvent { found: usize },
    #[error("stream has no events")]
    NoEvents,
    #[error("window length {found} not supported by {stat} (expected {expected})")]
    WindowLength {
        stat: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("statistic {stat} is {found} but the {expected} mode was requested")]
    ModeMismatch {
        stat: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("fast path requires additive statistic")]
    NotAdditive,
    #[error("fast path requires shift-equivariant statistic")]
    NotShiftEquivariant,
    #[error("mixing profile incomplete: no coefficient at lag {0}")]
    MixingProfileIncomplete(usize),
    #[error("stability profile incomplete: no coefficient at lag {0}")]
    StabilityProfileIncomplete(usize),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("empirical stability profile requires explicit override")]
    EmpiricalGamma,
    #[error("time set must be nonempty")]
    EmptyTimeSet,
    #[error("quantile undefined at a=0")]
    QuantileAtZero,
    #[error("empty series in {}", .0.display())]
    EmptySeries(PathBuf),
    #[error("{}: line {line}: {message}", .path.display())]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("invalid price {value} at position {position}")]
    InvalidPrice { position: usize, value: f64 },
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
