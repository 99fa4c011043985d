use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Statistical "untestable" outcomes are not
/// errors; they are reported in-band through [`crate::stattests::Outcome`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: malformed timestamp {value:?} (expected YYYY-MM-DDThh:mm:ss)")]
    Timestamp { line: u64, value: String },
    #[error("input has a header {found:?}, expected \"timestamp\"")]
    Header { found: String },
    #[error("only {found} occurrence(s) of {weekday} in the input, {requested} requested")]
    InsufficientWeeks {
        weekday: String,
        requested: usize,
        found: usize,
    },
    #[error("duplicate arrival timestamps (batch arrivals are not supported): {}", .instants.join(", "))]
    DuplicateTimestamps { instants: Vec<String> },
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid interval [{a}, {b})")]
    Interval { a: f64, b: f64 },
    #[error("interval [{a}, {b}) is not aligned to the {cell_width} h cell grid")]
    Misaligned { a: f64, b: f64, cell_width: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty sample")]
    EmptySample,
    #[error("brute-force search space has {size} partitions, above the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
