//! HTTP front end for scenario editing, forecasting and solving.
//!
//! All routes live under `/api/v1`. Plans come from the same engine call the
//! CLI uses, so a solve here and `hieralloc allocate --output json` agree.

pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hieralloc_core::forecast::forecast_all;
use hieralloc_core::{
    run_scenario, validate_scenario, Execution, Level, RedistributionPolicy, Scenario,
    SolveOptions, Stage, Violation,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use store::{ScenarioStore, StoreError};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Allowed browser origin; `None` allows any.
    pub cors_origin: Option<String>,
    /// Directory of built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<ScenarioStore>,
}

/// Every non-2xx response body has an `error` string plus optional detail.
#[derive(Debug)]
pub enum ApiError {
    NotFound(u64),
    Violations(Vec<Violation>),
    BadRequest(String),
    Conflict { expected: u64, current: u64 },
    Pipeline { stage: Stage, message: String },
    InsufficientHistory(Vec<String>),
    Internal(String),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::NotFound(id),
            StoreError::Conflict { expected, current } => ApiError::Conflict { expected, current },
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(id) => (
                StatusCode::NOT_FOUND,
                json!({ "error": format!("scenario {id} not found") }),
            ),
            ApiError::Violations(v) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "invalid scenario", "violations": v }),
            ),
            ApiError::BadRequest(message) => (StatusCode::BAD_REQUEST, json!({ "error": message })),
            ApiError::Conflict { expected, current } => (
                StatusCode::CONFLICT,
                json!({
                    "error": "revision mismatch",
                    "expected": expected,
                    "current": current,
                }),
            ),
            ApiError::Pipeline { stage, message } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": message, "stage": stage }),
            ),
            ApiError::InsufficientHistory(regions) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "insufficient history", "regions": regions }),
            ),
            ApiError::Internal(message) => {
                tracing::error!(%message, "internal error");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message }))
            }
        };
        (status, Json(body)).into_response()
    }
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("digits are valid header text")
}

fn with_etag(status: StatusCode, scenario: Scenario) -> Response {
    let tag = etag(scenario.revision);
    (status, [(header::ETAG, tag)], Json(scenario)).into_response()
}

/// Accepts `3`, `"3"` and `W/"3"`.
fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = raw
        .to_str()
        .map_err(|_| ApiError::BadRequest("If-Match is not valid text".into()))?
        .trim();
    if text == "*" {
        return Ok(None);
    }
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse()
        .map(Some)
        .map_err(|_| ApiError::BadRequest(format!("If-Match must carry a revision number, got {text:?}")))
}

async fn list_scenarios(State(state): State<AppState>) -> Json<Vec<Scenario>> {
    Json(state.store.list())
}

async fn create_scenario(
    State(state): State<AppState>,
    Json(scenario): Json<Scenario>,
) -> Result<Response, ApiError> {
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        return Err(ApiError::Violations(violations));
    }
    let created = state.store.create(scenario)?;
    let location = HeaderValue::from_str(&format!(
        "/api/v1/scenarios/{}",
        created.id.unwrap_or_default()
    ))
    .expect("ascii path");
    let mut response = with_etag(StatusCode::CREATED, created);
    response.headers_mut().insert(header::LOCATION, location);
    Ok(response)
}

async fn get_scenario(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    Ok(with_etag(StatusCode::OK, state.store.get(id)?))
}

async fn delete_scenario(State(state): State<AppState>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    state.store.delete(id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionPatch {
    pub name: String,
    #[serde(default)]
    pub demand: Option<f64>,
    #[serde(default)]
    pub severity: Option<f64>,
}

/// Partial update. Fields left out are untouched.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPatch {
    #[serde(default)]
    pub supply: Option<f64>,
    #[serde(default)]
    pub regions: Vec<RegionPatch>,
}

fn apply_patch(scenario: &mut Scenario, patch: &ScenarioPatch) -> Result<(), ApiError> {
    if let Some(supply) = patch.supply {
        scenario.supply = supply;
    }
    for edit in &patch.regions {
        let region = scenario
            .regions
            .iter_mut()
            .find(|r| r.name == edit.name)
            .ok_or_else(|| ApiError::BadRequest(format!("unknown region \"{}\"", edit.name)))?;
        if let Some(d) = edit.demand {
            region.demand = d;
        }
        if let Some(s) = edit.severity {
            region.severity = s;
        }
    }
    let violations = validate_scenario(scenario);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ApiError::Violations(violations))
    }
}

async fn patch_scenario(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    headers: HeaderMap,
    Json(patch): Json<ScenarioPatch>,
) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let updated = state.store.update(id, expected, |s| apply_patch(s, &patch))??;
    Ok(with_etag(StatusCode::OK, updated))
}

/// Solve request body. Omitted fields fall back to the scenario's config.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    #[serde(default)]
    pub level: Option<Level>,
    #[serde(default)]
    pub redistribution: Option<RedistributionPolicy>,
    #[serde(default)]
    pub use_fixture_predicted: Option<bool>,
}

impl SolveRequest {
    pub fn options_for(&self, scenario: &Scenario) -> SolveOptions {
        let base = SolveOptions::from_scenario(scenario);
        SolveOptions {
            level: self.level.unwrap_or(base.level),
            redistribution: self.redistribution.unwrap_or(base.redistribution),
            use_fixture_predicted: self.use_fixture_predicted.unwrap_or(base.use_fixture_predicted),
        }
    }
}

async fn solve_scenario(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    body: Option<Json<SolveRequest>>,
) -> Result<Response, ApiError> {
    let scenario = state.store.get(id)?;
    let request = body.map(|Json(b)| b).unwrap_or_default();
    let options = request.options_for(&scenario);
    let plan = tokio::task::spawn_blocking(move || run_scenario(&scenario, &options, Execution::Parallel))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Pipeline {
            stage: e.stage(),
            message: e.to_string(),
        })?;
    Ok(Json(plan).into_response())
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ForecastQuery {
    pub horizon: Option<usize>,
}

async fn get_forecast(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    Query(query): Query<ForecastQuery>,
) -> Result<Response, ApiError> {
    let scenario = state.store.get(id)?;
    let horizon = query.horizon.unwrap_or(scenario.config.horizon);
    if horizon == 0 {
        return Err(ApiError::BadRequest("horizon must be >= 1".into()));
    }
    let results = forecast_all(
        &scenario.regions,
        horizon,
        scenario.config.smoothing,
        Execution::Parallel,
    );
    let mut forecasts = Vec::with_capacity(results.len());
    let mut short = Vec::new();
    for (region, result) in scenario.regions.iter().zip(results) {
        match result {
            Ok((forecast, _)) => forecasts.push(forecast),
            Err(hieralloc_core::ForecastError::InsufficientHistory(_)) => short.push(region.name.clone()),
            Err(e) => {
                return Err(ApiError::Pipeline {
                    stage: Stage::Forecast,
                    message: format!("{}: {e}", region.name),
                })
            }
        }
    }
    if !short.is_empty() {
        return Err(ApiError::InsufficientHistory(short));
    }
    Ok(Json(forecasts).into_response())
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let allow = match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(value) => AllowOrigin::exact(value),
        None => AllowOrigin::any(),
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE, header::IF_MATCH])
        .expose_headers([header::ETAG, header::LOCATION])
}

/// Builds the application router.
pub fn router(store: Arc<ScenarioStore>, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/scenarios", get(list_scenarios).post(create_scenario))
        .route(
            "/scenarios/{id}",
            get(get_scenario).patch(patch_scenario).delete(delete_scenario),
        )
        .route("/scenarios/{id}/solve", post(solve_scenario))
        .route("/scenarios/{id}/forecast", get(get_forecast));
    let mut app = Router::new()
        .nest("/api/v1", api)
        .with_state(AppState { store });
    if let Some(dir) = &config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(cors(config.cors_origin.as_deref()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn if_match_forms() {
        let mut h = HeaderMap::new();
        assert_eq!(if_match(&h).unwrap(), None);
        for (raw, want) in [("3", Some(3)), ("\"4\"", Some(4)), ("W/\"5\"", Some(5)), ("*", None)] {
            h.insert(header::IF_MATCH, HeaderValue::from_static(raw));
            assert_eq!(if_match(&h).unwrap(), want, "{raw}");
        }
        h.insert(header::IF_MATCH, HeaderValue::from_static("abc"));
        assert!(if_match(&h).is_err());
    }
}
