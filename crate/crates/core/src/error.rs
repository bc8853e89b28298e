//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The CSV header is missing a required column or cannot be read.
    #[error("schema error: {0}")]
    Schema(String),
    /// A timestamp is not close enough to the 15-minute grid to be snapped onto it.
    #[error("granularity error: timestamp {timestamp} is {offset_secs}s off the 15-minute grid")]
    Granularity { timestamp: String, offset_secs: i64 },
    /// Two rows map to the same 15-minute slot.
    #[error("duplicate timestamp {0}")]
    Duplicate(String),
    /// A gap that the chosen missing-data policy cannot fill.
    #[error("unfillable gap on day {day}: {reason}")]
    Unfillable { day: usize, reason: String },
    /// An index outside the valid range.
    #[error("range error: {what} = {value}, valid range is {min}..{max}")]
    Range {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },
    /// Series that should share start and length do not.
    #[error("alignment error: {0}")]
    Alignment(String),
    /// Not enough history before the requested day.
    #[error("insufficient history: {required} required, {available} available ({what})")]
    History {
        what: &'static str,
        required: usize,
        available: usize,
    },
    /// An input value is not usable (non-finite, negative, ...).
    #[error("invalid input: {0}")]
    Input(String),
    /// Mismatched vector or matrix dimensions.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    /// The least-squares system is rank deficient.
    #[error("singular system ({0}); use a ridge penalty > 0")]
    Singular(String),
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The weather series does not cover the requested day.
    #[error("weather coverage error: day {day} not covered ({available_days} days available)")]
    Coverage { day: usize, available_days: usize },
    /// A series is too short for the requested differencing.
    #[error("length error: {0}")]
    Length(String),
    /// Training diverged.
    #[error("training produced a non-finite loss at epoch {epoch}; try a smaller learning rate (currently {learning_rate})")]
    NanLoss { epoch: usize, learning_rate: f64 },
    /// A configuration value is invalid.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    /// A model id that is not registered.
    #[error("unknown model id `{id}`; valid ids are: {valid}")]
    UnknownModel { id: String, valid: String },
    /// Malformed checkpoint or report file.
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn history(what: &'static str, required: usize, available: usize) -> Self {
        Error::History {
            what,
            required,
            available,
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
