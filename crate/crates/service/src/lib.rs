//! HTTP API over the voyage pipeline.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/scenarios` | scenario JSON | `201 {id, scenario, warnings}` |
//! | POST | `/scenarios/{id}/optimize` | none | `202 {job_id, state}` |
//! | GET | `/jobs/{id}` | | `{id, scenario_id, state, progress, error}` |
//! | GET | `/scenarios/{id}/result` | | result bundle |
//! | GET | `/scenarios/{id}/tiles/tl` | `src_lat, src_lon[, depth_m, max_cells]` | TL tile |
//!
//! Unknown ids give 404, malformed bodies 422 with field errors, and
//! optimize/tile requests without a fitted TL cache 409. A scenario runs at
//! most one optimize job at a time.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use quietvoyage_core::interface_hub::{Engine, HubError, ScenarioConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

/// Environment variable holding the default listening port.
pub const PORT_ENV: &str = "QUIETVOYAGE_PORT";
pub const DEFAULT_PORT: u16 = 8080;

pub fn default_port() -> u16 {
    std::env::var(PORT_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_PORT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub scenario_id: String,
    pub state: JobState,
    pub progress: f64,
    pub error: Option<String>,
}

struct Job {
    id: String,
    scenario_id: String,
    state: Mutex<(JobState, Option<String>)>,
    progress: AtomicU64,
}

impl Job {
    fn status(&self) -> JobStatus {
        let (state, error) = self.state.lock().expect("job lock").clone();
        JobStatus {
            id: self.id.clone(),
            scenario_id: self.scenario_id.clone(),
            state,
            progress: f64::from_bits(self.progress.load(Ordering::Relaxed)),
            error,
        }
    }

    fn set_progress(&self, f: f64) {
        self.progress.store(f.clamp(0.0, 1.0).to_bits(), Ordering::Relaxed);
    }

    fn is_active(&self) -> bool {
        matches!(self.state.lock().expect("job lock").0, JobState::Queued | JobState::Running)
    }
}

struct ScenarioEntry {
    engine: Arc<Engine>,
    job: Option<Arc<Job>>,
    /// Serialised result bundle of the last successful job.
    result: Option<Arc<String>>,
}

/// Shared service state. Relative data paths in posted scenarios resolve
/// against `base_dir`.
pub struct AppState {
    base_dir: PathBuf,
    scenarios: Mutex<HashMap<String, ScenarioEntry>>,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(base_dir: PathBuf) -> Arc<Self> {
        Arc::new(Self {
            base_dir,
            scenarios: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    /// Registers a loaded scenario under `id`, replacing any previous entry.
    pub fn insert_engine(&self, id: &str, engine: Engine) {
        self.scenarios
            .lock()
            .expect("scenario lock")
            .insert(id.to_string(), ScenarioEntry { engine: Arc::new(engine), job: None, result: None });
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("invalid request")]
    Unprocessable(Vec<FieldError>),
    #[error("{message}")]
    Conflict { message: String, job: Option<JobStatus> },
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl From<HubError> for ApiError {
    fn from(e: HubError) -> Self {
        match e {
            HubError::Parse { key, line, message } => ApiError::Unprocessable(vec![FieldError { field: key, line, message }]),
            HubError::MissingFile { ref key, .. } => {
                ApiError::Unprocessable(vec![FieldError { field: key.clone(), line: None, message: e.to_string() }])
            }
            HubError::MissingCache(_) => ApiError::Conflict { message: e.to_string(), job: None },
            e if e.is_validation() => {
                ApiError::Unprocessable(vec![FieldError { field: String::new(), line: None, message: e.to_string() }])
            }
            e => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, json!({ "error": format!("{what} not found") })),
            ApiError::Unprocessable(errors) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "errors": errors })),
            ApiError::Conflict { message, job } => (StatusCode::CONFLICT, json!({ "error": message, "job": job })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, axum::Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn json_text(status: StatusCode, text: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn create_scenario(State(state): State<Arc<AppState>>, body: String) -> ApiResult<Response> {
    let base = state.base_dir.clone();
    let st = Arc::clone(&state);
    let (id, echo, warnings) = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let cfg = ScenarioConfig::from_json(&body, &base)?;
        let echo: serde_json::Value = serde_json::from_str(&cfg.to_json()).expect("valid json");
        let warnings = cfg.warnings.clone();
        let engine = Engine::load(cfg)?;
        let id = st.fresh_id("s");
        st.insert_engine(&id, engine);
        Ok((id, echo, warnings))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, axum::Json(json!({ "id": id, "scenario": echo, "warnings": warnings }))).into_response())
}

async fn optimize(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let engine = {
        let scenarios = state.scenarios.lock().expect("scenario lock");
        let entry = scenarios.get(&id).ok_or_else(|| ApiError::NotFound(format!("scenario {id}")))?;
        if let Some(job) = entry.job.as_ref().filter(|j| j.is_active()) {
            return Err(ApiError::Conflict {
                message: format!("scenario {id} already has an active job"),
                job: Some(job.status()),
            });
        }
        Arc::clone(&entry.engine)
    };
    let tl = engine.tl_model()?;
    let job = Arc::new(Job {
        id: state.fresh_id("j"),
        scenario_id: id.clone(),
        state: Mutex::new((JobState::Queued, None)),
        progress: AtomicU64::new(0f64.to_bits()),
    });
    {
        let mut scenarios = state.scenarios.lock().expect("scenario lock");
        let entry = scenarios.get_mut(&id).ok_or_else(|| ApiError::NotFound(format!("scenario {id}")))?;
        if entry.job.as_ref().is_some_and(|j| j.is_active()) {
            return Err(ApiError::Conflict { message: format!("scenario {id} already has an active job"), job: None });
        }
        entry.job = Some(Arc::clone(&job));
    }
    state.jobs.lock().expect("job lock").insert(job.id.clone(), Arc::clone(&job));

    let st = Arc::clone(&state);
    let j = Arc::clone(&job);
    tokio::task::spawn_blocking(move || {
        j.state.lock().expect("job lock").0 = JobState::Running;
        let progress = |f: f64| j.set_progress(f);
        let outcome = engine.run(tl.as_ref(), None, Some(&progress));
        match outcome {
            Ok(bundle) => {
                let text = Arc::new(bundle.to_json());
                if let Some(entry) = st.scenarios.lock().expect("scenario lock").get_mut(&j.scenario_id) {
                    entry.result = Some(text);
                }
                j.set_progress(1.0);
                *j.state.lock().expect("job lock") = (JobState::Done, None);
            }
            Err(e) => {
                log::warn!("job {} failed: {e}", j.id);
                *j.state.lock().expect("job lock") = (JobState::Failed, Some(e.to_string()));
            }
        }
    });
    Ok((StatusCode::ACCEPTED, axum::Json(json!({ "job_id": job.id, "state": JobState::Queued }))).into_response())
}

async fn job_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<axum::Json<JobStatus>> {
    let jobs = state.jobs.lock().expect("job lock");
    let job = jobs.get(&id).ok_or_else(|| ApiError::NotFound(format!("job {id}")))?;
    Ok(axum::Json(job.status()))
}

async fn result(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let scenarios = state.scenarios.lock().expect("scenario lock");
    let entry = scenarios.get(&id).ok_or_else(|| ApiError::NotFound(format!("scenario {id}")))?;
    let active = entry.job.as_ref().filter(|j| j.is_active());
    match (&entry.result, active) {
        (Some(text), None) => Ok(json_text(StatusCode::OK, text.as_ref().clone())),
        (_, Some(job)) => Err(ApiError::Conflict { message: "job has not finished".into(), job: Some(job.status()) }),
        (None, None) => Err(ApiError::Conflict {
            message: "no result; start an optimize job first".into(),
            job: entry.job.as_ref().map(|j| j.status()),
        }),
    }
}

#[derive(Debug, Deserialize)]
struct TileQuery {
    src_lat: Option<f64>,
    src_lon: Option<f64>,
    depth_m: Option<f64>,
    max_cells: Option<usize>,
}

async fn tl_tile(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<TileQuery>,
) -> ApiResult<Response> {
    let engine = {
        let scenarios = state.scenarios.lock().expect("scenario lock");
        Arc::clone(&scenarios.get(&id).ok_or_else(|| ApiError::NotFound(format!("scenario {id}")))?.engine)
    };
    let mut errors = Vec::new();
    for (field, v) in [("src_lat", q.src_lat), ("src_lon", q.src_lon)] {
        if v.is_none() {
            errors.push(FieldError { field: field.into(), line: None, message: "required query parameter".into() });
        }
    }
    if !errors.is_empty() {
        return Err(ApiError::Unprocessable(errors));
    }
    let src = quietvoyage_core::GeoPoint::surface(q.src_lat.unwrap_or_default(), q.src_lon.unwrap_or_default());
    let depth = q.depth_m.unwrap_or(1.0);
    let cells = q.max_cells.unwrap_or(60).min(200);
    let tile = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let tl = engine.tl_model()?;
        Ok(engine.tl_tile(tl.as_ref(), &src, depth, cells)?)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(axum::Json(tile).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenarios", post(create_scenario))
        .route("/scenarios/{id}/optimize", post(optimize))
        .route("/scenarios/{id}/result", get(result))
        .route("/scenarios/{id}/tiles/tl", get(tl_tile))
        .route("/jobs/{id}", get(job_status))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends. Returns the bound address
/// through `bound` before serving.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr, bound: Option<tokio::sync::oneshot::Sender<SocketAddr>>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    log::info!("listening on http://{local}");
    if let Some(tx) = bound {
        let _ = tx.send(local);
    }
    axum::serve(listener, router(state)).await?;
    Ok(())
}
