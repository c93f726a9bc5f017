//! HTTP API over scenarios and solver jobs.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/v1/scenarios` | `{"scenario": {...}}` or `{"synthetic": {...}}`; 201 with `{"id"}` |
//! | GET | `/api/v1/scenarios/{id}/summary` | tracts, archetype counts, baseline burden histogram |
//! | POST | `/api/v1/jobs` | `{"scenario_id", "kind": "solve" \| "sweep" \| "validate", "overrides"}`; 202 with the job |
//! | GET | `/api/v1/jobs/{id}` | the job; `?wait_secs=N` long-polls up to 30 s for completion |
//! | GET | `/api/v1/jobs/{id}/result` | 409 until done, and with the error once failed |
//!
//! A repeated `Idempotency-Key` header on scenario upload returns the first
//! id with 200. Solver work runs on a fixed pool of worker threads fed by a
//! FIFO queue. Everything lives under the data directory as JSON.

mod jobs;
mod store;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

pub use jobs::{execute, JobKind, JobResult, Overrides};
pub use store::{Job, JobState, Store};

use crate::benchmark::{baseline_histogram, HistogramRow, HISTOGRAM_EDGES};
use crate::domain::{FieldError, Scenario, ValidationErrors};
use crate::ingest::{IngestError, SyntheticSpec};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

/// Longest accepted `wait_secs`.
pub const MAX_WAIT_SECS: u64 = 30;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub workers: usize,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Opens the store and builds the router.
pub fn app(cfg: &ServiceConfig) -> std::io::Result<Router> {
    let store = Store::open(&cfg.data_dir, cfg.workers)?;
    Ok(router(store))
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/api/v1/scenarios", post(post_scenario))
        .route("/api/v1/scenarios/{id}/summary", get(scenario_summary))
        .route("/api/v1/jobs", post(post_job))
        .route("/api/v1/jobs/{id}", get(get_job))
        .route("/api/v1/jobs/{id}/result", get(get_result))
        .layer(CorsLayer::permissive())
        .with_state(store)
}

pub async fn serve(addr: &str, cfg: ServiceConfig) -> std::io::Result<()> {
    let app = app(&cfg)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn invalid(errors: Vec<FieldError>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": "validation failed", "errors": errors }),
        }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self::invalid(vec![FieldError {
            field: field.to_string(),
            message: message.into(),
        }])
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} `{id}`"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::field("body", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRequest {
    scenario: Option<Scenario>,
    synthetic: Option<SyntheticSpec>,
}

fn prefixed(prefix: &str, errs: ValidationErrors) -> Vec<FieldError> {
    errs.0
        .into_iter()
        .map(|e| FieldError {
            field: format!("{prefix}.{}", e.field),
            message: e.message,
        })
        .collect()
}

fn scenario_of(req: ScenarioRequest) -> ApiResult<Scenario> {
    match (req.scenario, req.synthetic) {
        (Some(s), None) => {
            s.validate().map_err(|e| ApiError::invalid(prefixed("scenario", e)))?;
            Ok(s)
        }
        (None, Some(spec)) => spec.generate().map_err(|e| match e {
            IngestError::Invalid(v) => ApiError::invalid(prefixed("synthetic", v)),
            other => ApiError::field("synthetic", other.to_string()),
        }),
        _ => Err(ApiError::field("body", "give exactly one of `scenario` and `synthetic`")),
    }
}

async fn post_scenario(State(store): State<Arc<Store>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let key = match headers.get("idempotency-key") {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| ApiError::field("Idempotency-Key", "must be visible ASCII"))?
                .to_string(),
        ),
        None => None,
    };
    let (id, created) = blocking(move || {
        let scenario = scenario_of(parse_body(&body)?)?;
        store.put_scenario(&scenario, key.as_deref()).map_err(ApiError::internal)
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({ "id": id }))).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractSummary {
    pub id: String,
    pub archetypes: usize,
    pub households: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub hours: usize,
    pub archetypes: usize,
    pub households: u64,
    pub tracts: Vec<TractSummary>,
    pub burden_histogram: Vec<HistogramRow>,
}

fn summarize(id: String, s: &Scenario) -> ScenarioSummary {
    let tracts = s
        .tracts
        .iter()
        .map(|t| {
            let members: Vec<_> = s.archetypes.iter().filter(|a| a.tract_id == t.id).collect();
            TractSummary {
                id: t.id.0.clone(),
                archetypes: members.len(),
                households: members.iter().map(|a| a.count as u64).sum(),
            }
        })
        .collect();
    ScenarioSummary {
        id,
        hours: s.profiles.values().next().map_or(0, |p| p.hours),
        archetypes: s.archetypes.len(),
        households: s.archetypes.iter().map(|a| a.count as u64).sum(),
        tracts,
        burden_histogram: baseline_histogram(s, &HISTOGRAM_EDGES),
    }
}

async fn scenario_summary(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<ScenarioSummary>> {
    blocking(move || {
        let s = store
            .scenario(&id)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError::not_found("scenario", &id))?;
        Ok(Json(summarize(id, &s)))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRequest {
    scenario_id: String,
    kind: JobKind,
    #[serde(default)]
    overrides: Overrides,
}

async fn post_job(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<Response> {
    let req: JobRequest = parse_body(&body)?;
    req.overrides
        .check(req.kind)
        .map_err(|m| ApiError::field("overrides", m))?;
    let job = blocking(move || {
        if !store.scenario_exists(&req.scenario_id) {
            return Err(ApiError::not_found("scenario", &req.scenario_id));
        }
        store
            .submit(&req.scenario_id, req.kind, req.overrides)
            .map_err(ApiError::internal)
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct WaitQuery {
    wait_secs: Option<u64>,
}

fn finished(j: &Job) -> bool {
    matches!(j.state, JobState::Done | JobState::Failed)
}

async fn get_job(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<WaitQuery>,
) -> ApiResult<Json<Job>> {
    let deadline = Instant::now() + Duration::from_secs(q.wait_secs.unwrap_or(0).min(MAX_WAIT_SECS));
    loop {
        let job = store.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
        if finished(&job) || Instant::now() >= deadline {
            return Ok(Json(job));
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

async fn get_result(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = store.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    match job.state {
        JobState::Done => blocking(move || store.result(&job).map(Json).map_err(ApiError::internal)).await,
        JobState::Failed => Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({
                "error": "job failed",
                "state": job.state,
                "message": job.error,
            }),
        }),
        state => Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({ "error": "job has not finished", "state": state }),
        }),
    }
}
