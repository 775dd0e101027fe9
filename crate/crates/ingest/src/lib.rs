//! Loading demand tables and active-case histories into scenarios.

pub mod error;
pub mod fixtures;
pub mod history;
pub mod remote;
pub mod scenario;
pub mod tables;

pub use error::{FetchError, IngestError, RowError};
pub use history::{load_case_history, CaseHistory, HistoryFormat, HistoryRecord};
pub use remote::{fetch_remote_history, RemoteSource, ENDPOINT_ENV};
pub use scenario::{build_scenario, ScenarioParts};
pub use tables::{load_demands, load_predicted, load_weights, parse_demands, DemandRecord};

use std::fs::File;
use std::path::Path;

/// Opens `path`, mapping I/O failures to [`IngestError::Io`] with the path.
pub fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}
