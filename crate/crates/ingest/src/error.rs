use std::io;

use thiserror::Error;

/// A single bad input row. `row` is the 1-based line number, header included.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} (row {row}) [column {column}]")]
pub struct RowError {
    pub row: u64,
    pub column: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{0}")]
    Row(RowError),
    #[error("duplicate region \"{region}\" (row {row})")]
    DuplicateRegion { region: String, row: u64 },
    #[error("duplicate entry for {region} on {date} (row {row})")]
    DuplicateDate { region: String, date: String, row: u64 },
    #[error("missing column \"{0}\" in header")]
    MissingColumn(String),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("unknown region \"{0}\"")]
    UnknownRegion(String),
}

impl IngestError {
    pub(crate) fn row(row: u64, column: &str, message: impl Into<String>) -> Self {
        IngestError::Row(RowError {
            row,
            column: column.to_owned(),
            message: message.into(),
        })
    }
}

/// Errors from the remote case-data fetcher. Each variant says whether a
/// retry could help.
#[derive(Debug, Error)]
pub enum FetchError {
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("server returned HTTP {status}")]
    Status { status: u16 },
    #[error("schema error in field \"{field}\": {message}")]
    Schema { field: String, message: String },
    #[error("cache write failed: {0}")]
    Cache(#[source] io::Error),
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        match self {
            FetchError::Transport { .. } => true,
            FetchError::Status { status } => *status >= 500 || *status == 429,
            FetchError::Schema { .. } => false,
            FetchError::Cache(_) => true,
        }
    }
}
