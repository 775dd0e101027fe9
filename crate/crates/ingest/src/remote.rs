//! Fetching case histories from an HTTP endpoint that serves the history
//! JSON shape, with an on-disk cache of the last good response.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::FetchError;
use crate::history::{collect_history, CaseHistory, HistoryRecord};

/// Environment variable naming the default endpoint.
pub const ENDPOINT_ENV: &str = "ALLOC_CASE_ENDPOINT";

#[derive(Debug, Clone)]
pub struct RemoteSource {
    pub endpoint: String,
    /// Passed through as `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
    pub cache_path: Option<PathBuf>,
    pub timeout: Duration,
}

impl RemoteSource {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            bearer_token: None,
            cache_path: None,
            timeout: Duration::from_secs(30),
        }
    }

    /// Endpoint from [`ENDPOINT_ENV`], if set.
    pub fn from_env() -> Option<Self> {
        std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()).map(Self::new)
    }
}

/// What gets written to the cache file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CachedResponse {
    pub endpoint: String,
    pub fetched_at: String,
    pub records: Vec<HistoryRecord>,
}

fn schema_error(value: &serde_json::Value) -> FetchError {
    let Some(items) = value.as_array() else {
        return FetchError::Schema {
            field: "$".into(),
            message: "expected a JSON array".into(),
        };
    };
    for (i, item) in items.iter().enumerate() {
        for (field, ok) in [
            ("region", item.get("region").is_some_and(|v| v.is_string())),
            ("date", item.get("date").is_some_and(|v| v.is_string())),
            ("active", item.get("active").is_some_and(|v| v.is_i64() || v.is_u64())),
        ] {
            if !ok {
                return FetchError::Schema {
                    field: format!("[{i}].{field}"),
                    message: "missing or wrong type".into(),
                };
            }
        }
    }
    FetchError::Schema {
        field: "$".into(),
        message: "unexpected shape".into(),
    }
}

/// Parses and validates a response body. Kept separate from the transport so
/// it can be exercised without a server.
pub fn decode_response(body: &str) -> Result<Vec<HistoryRecord>, FetchError> {
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| FetchError::Schema {
        field: "$".into(),
        message: e.to_string(),
    })?;
    let records: Vec<HistoryRecord> =
        serde_json::from_value(value.clone()).map_err(|_| schema_error(&value))?;
    if let Some(i) = records.iter().position(|r| r.active < 0) {
        return Err(FetchError::Schema {
            field: format!("[{i}].active"),
            message: "active must be ≥ 0".into(),
        });
    }
    Ok(records)
}

fn write_cache(path: &std::path::Path, cached: &CachedResponse) -> Result<(), FetchError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| std::path::Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(FetchError::Cache)?;
    serde_json::to_writer_pretty(&mut tmp, cached)
        .map_err(|e| FetchError::Cache(std::io::Error::other(e)))?;
    tmp.flush().map_err(FetchError::Cache)?;
    tmp.persist(path).map_err(|e| FetchError::Cache(e.error))?;
    Ok(())
}

/// GETs the endpoint and returns the per-region series, optionally limited
/// to `regions`. The raw response is cached when a cache path is set.
pub fn fetch_remote_history(
    source: &RemoteSource,
    regions: Option<&[String]>,
) -> Result<CaseHistory, FetchError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(source.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut request = agent.get(&source.endpoint);
    if let Some(token) = &source.bearer_token {
        request = request.header("Authorization", &format!("Bearer {token}"));
    }
    let mut response = request.call().map_err(|e| FetchError::Transport {
        message: e.to_string(),
    })?;
    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(FetchError::Status { status });
    }
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| FetchError::Transport {
            message: e.to_string(),
        })?;
    let mut records = decode_response(&body)?;

    if let Some(path) = &source.cache_path {
        let cached = CachedResponse {
            endpoint: source.endpoint.clone(),
            fetched_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            records: records.clone(),
        };
        write_cache(path, &cached)?;
    }

    if let Some(filter) = regions {
        let keep: BTreeSet<&str> = filter.iter().map(String::as_str).collect();
        records.retain(|r| keep.contains(r.region.as_str()));
    }
    collect_history(records.into_iter().enumerate().map(|(i, r)| (i as u64 + 1, r))).map_err(|e| {
        FetchError::Schema {
            field: "records".into(),
            message: e.to_string(),
        }
    })
}

/// Reads back a cache file written by [`fetch_remote_history`].
pub fn load_cached(path: &std::path::Path) -> Result<(CachedResponse, CaseHistory), crate::IngestError> {
    let bytes = std::fs::read(path).map_err(|source| crate::IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cached: CachedResponse = serde_json::from_slice(&bytes)?;
    let history = collect_history(
        cached
            .records
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, r)| (i as u64 + 1, r)),
    )?;
    Ok((cached, history))
}
