use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column '{0}' in csv header")]
    MissingColumn(String),

    #[error("line {line}: unparseable date '{value}' (expected YYYY-MM-DD)")]
    BadDate { line: u64, value: String },

    #[error("line {line}: unparseable count '{value}'")]
    BadCount { line: u64, value: String },

    #[error("line {line}: negative count {value}")]
    NegativeCount { line: u64, value: i64 },

    #[error("duplicate row for jurisdiction '{jurisdiction}' week {week}")]
    DuplicateKey { jurisdiction: String, week: NaiveDate },

    #[error("date {date} does not fall on the weekly grid anchored at {anchor}")]
    OffGrid { date: NaiveDate, anchor: NaiveDate },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("week {0} is before the first week of the panel")]
    CutoffBeforeStart(NaiveDate),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient data for {context}: need {needed}, have {available}")]
    InsufficientData {
        context: String,
        needed: usize,
        available: usize,
    },

    #[error("series is constant")]
    ConstantSeries,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("all-zero response: no penalty grid can be formed")]
    ZeroResponse,

    #[error("coordinate descent did not converge after {iterations} sweeps")]
    NotConverged { iterations: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("benchmark metric is zero; improvement undefined")]
    ZeroBenchmark,

    #[error("process is not stationary (companion spectral radius {radius:.6})")]
    NonStationary { radius: f64 },

    #[error("unknown jurisdiction '{0}'")]
    UnknownJurisdiction(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::UnknownJurisdiction(_) => ErrorKind::Usage,
            Error::NotConverged { .. }
            | Error::NonFinite(_)
            | Error::NonStationary { .. }
            | Error::UndefinedMetric(_)
            | Error::ZeroBenchmark => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
