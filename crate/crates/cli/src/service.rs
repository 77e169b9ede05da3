//! Local HTTP service over one in-memory project.
//!
//! Reads run concurrently; writes take the project lock and are serialized.
//! Optimization and simulation run as background jobs on a snapshot of the
//! project taken when the job starts, and are polled through `/api/jobs/{id}`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use foldwright_core::string_sim::RoutingPlan;
use foldwright_core::tg::TransitionGraphDesign;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dxf::export_dxf;
use crate::ops::{self, to_json, OpError, OptimizeReport, OptimizeRequest};
use crate::project::{Issue, Project};
use crate::svg::{export_svg, SvgStyle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default)]
    pub issues: Vec<Issue>,
}

impl From<&OpError> for ErrorBody {
    fn from(e: &OpError) -> Self {
        ErrorBody {
            error: e.kind().into(),
            message: e.to_string(),
            issues: e.issues(),
        }
    }
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: "bad_request".into(),
                message: message.to_string(),
                issues: Vec::new(),
            },
        }
    }

    fn not_found(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody {
                error: "not_found".into(),
                message: message.to_string(),
                issues: Vec::new(),
            },
        }
    }
}

impl From<OpError> for ApiError {
    fn from(e: OpError) -> Self {
        let status = if e.is_io() {
            StatusCode::INTERNAL_SERVER_ERROR
        } else if e.kind() == "bad_request" {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError {
            status,
            body: ErrorBody::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, [(header::CONTENT_TYPE, "application/json")], to_json(&self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], to_json(value)).into_response()
}

fn ok<T: Serialize>(value: &T) -> ApiResult {
    Ok(json_response(StatusCode::OK, value))
}

/// Parse a JSON request body; an empty body means the default request.
fn body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(ApiError::bad_request)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed,
}

struct Job {
    kind: &'static str,
    total: usize,
    done: AtomicUsize,
    outcome: Mutex<Option<Result<Value, ErrorBody>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: u64,
    pub kind: String,
    pub status: JobStatus,
    pub done: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Job {
    fn view(&self, id: u64) -> JobView {
        let outcome = self.outcome.lock().expect("job lock").clone();
        let (status, result, error) = match outcome {
            None => (JobStatus::Running, None, None),
            Some(Ok(v)) => (JobStatus::Done, Some(v), None),
            Some(Err(e)) => (JobStatus::Failed, None, Some(e)),
        };
        JobView {
            id,
            kind: self.kind.into(),
            status,
            done: self.done.load(Ordering::Relaxed),
            total: self.total,
            result,
            error,
        }
    }
}

pub struct AppState {
    project: RwLock<Project>,
    /// File that `PUT /api/project` and `synthesize` write through to.
    path: Option<PathBuf>,
    jobs: Mutex<BTreeMap<u64, Arc<Job>>>,
    next_job: AtomicU64,
}

impl AppState {
    pub fn new(project: Project, path: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            project: RwLock::new(project),
            path,
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
        })
    }

    pub fn project(&self) -> Project {
        self.project.read().expect("project lock").clone()
    }

    /// Apply `edit` under the write lock; the change is kept (and written
    /// through) only if `edit` succeeds.
    fn mutate<T>(&self, edit: impl FnOnce(&mut Project) -> Result<T, OpError>) -> Result<T, ApiError> {
        let mut guard = self.project.write().expect("project lock");
        let mut draft = guard.clone();
        let out = edit(&mut draft)?;
        if let Some(path) = &self.path {
            draft.save(path).map_err(OpError::from)?;
        }
        *guard = draft;
        Ok(out)
    }

    fn start_job<F>(self: &Arc<Self>, kind: &'static str, total: usize, work: F) -> u64
    where
        F: FnOnce(&Job) -> Result<Value, OpError> + Send + 'static,
    {
        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        let job = Arc::new(Job {
            kind,
            total,
            done: AtomicUsize::new(0),
            outcome: Mutex::new(None),
        });
        self.jobs.lock().expect("jobs lock").insert(id, job.clone());
        tokio::task::spawn_blocking(move || {
            let outcome = work(&job).map_err(|e| ErrorBody::from(&e));
            *job.outcome.lock().expect("job lock") = Some(outcome);
        });
        id
    }
}

type Shared = State<Arc<AppState>>;

async fn get_project(State(s): Shared) -> Response {
    let text = s.project.read().expect("project lock").to_json();
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn put_project(State(s): Shared, bytes: Bytes) -> ApiResult {
    let project = Project::from_json(&bytes).map_err(|e| ApiError::from(OpError::from(e)))?;
    ops::check(&project)?;
    let version = s.mutate(move |p| {
        *p = project;
        Ok(p.version)
    })?;
    ok(&serde_json::json!({ "version": version }))
}

async fn synthesize(State(s): Shared) -> ApiResult {
    let pattern = s.mutate(|p| {
        let pattern = ops::synthesize(p)?;
        p.pattern = Some(pattern.clone());
        Ok(pattern)
    })?;
    ok(&pattern)
}

#[derive(Debug, Default, Deserialize)]
struct FitnessRequest {
    #[serde(default)]
    design: Option<TransitionGraphDesign>,
}

async fn fitness(State(s): Shared, bytes: Bytes) -> ApiResult {
    let req: FitnessRequest = body(&bytes)?;
    ok(&ops::fitness(&s.project(), req.design.as_ref())?)
}

#[derive(Debug, Serialize)]
struct JobCreated {
    job: u64,
}

async fn start_optimize(State(s): Shared, bytes: Bytes) -> ApiResult {
    let req: OptimizeRequest = body(&bytes)?;
    let project = s.project();
    ops::check(&project)?;
    ops::require(&project.task, "task")?;
    if req.runs == 0 {
        return Err(ApiError::bad_request("runs must be at least 1"));
    }
    let total = req.runs * req.budget().max_generations;
    let id = s.start_job("optimize", total, move |job| {
        let result = ops::optimize(&project, &req, &|_, _| {
            job.done.fetch_add(1, Ordering::Relaxed);
        })?;
        Ok(serde_json::to_value(OptimizeReport::from_result(&req, &result)).expect("report serializes"))
    });
    Ok(json_response(StatusCode::ACCEPTED, &JobCreated { job: id }))
}

async fn get_job(State(s): Shared, Path(id): Path<u64>) -> ApiResult {
    let job = s.jobs.lock().expect("jobs lock").get(&id).cloned();
    match job {
        Some(job) => ok(&job.view(id)),
        None => Err(ApiError::not_found(format!("no job {id}"))),
    }
}

#[derive(Debug, Default, Deserialize)]
struct FoldRequest {
    theta: f64,
}

async fn fold(State(s): Shared, bytes: Bytes) -> ApiResult {
    let req: FoldRequest = body(&bytes)?;
    ok(&ops::fold(&s.project(), req.theta)?)
}

async fn start_simulate(State(s): Shared) -> ApiResult {
    let project = s.project();
    ops::check(&project)?;
    let total = ops::schedule_len(&project)?;
    ops::require(&project.pattern, "pattern")?;
    let id = s.start_job("simulate", total, move |job| {
        let report = ops::simulate(&project, &mut |_| {
            job.done.fetch_add(1, Ordering::Relaxed);
        })?;
        Ok(serde_json::to_value(report).expect("report serializes"))
    });
    Ok(json_response(StatusCode::ACCEPTED, &JobCreated { job: id }))
}

#[derive(Debug, Default, Deserialize)]
struct StepRequest {
    index: usize,
}

async fn simulate_step(State(s): Shared, bytes: Bytes) -> ApiResult {
    let req: StepRequest = body(&bytes)?;
    let project = s.project();
    let state = tokio::task::spawn_blocking(move || ops::simulate_step(&project, req.index))
        .await
        .map_err(|e| ApiError::bad_request(e))??;
    ok(&state)
}

#[derive(Debug, Default, Deserialize)]
struct RoutingRequest {
    #[serde(default)]
    plan: Option<RoutingPlan>,
}

async fn validate_routing(State(s): Shared, bytes: Bytes) -> ApiResult {
    let req: RoutingRequest = body(&bytes)?;
    ok(&ops::routing_report(&s.project(), req.plan.as_ref())?)
}

fn file_response(content_type: &'static str, bytes: impl Into<axum::body::Body>) -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, content_type)], bytes.into()).into_response()
}

async fn export_svg_file(State(s): Shared) -> ApiResult {
    let project = s.project();
    let pattern = ops::require(&project.pattern, "pattern")?;
    Ok(file_response("image/svg+xml", export_svg(pattern, &SvgStyle::default())))
}

async fn export_dxf_file(State(s): Shared) -> ApiResult {
    let project = s.project();
    let pattern = ops::require(&project.pattern, "pattern")?;
    Ok(file_response("application/dxf", export_dxf(pattern)))
}

async fn fabrication(State(s): Shared) -> ApiResult {
    let project = s.project();
    let model = tokio::task::spawn_blocking(move || ops::fabricate(&project))
        .await
        .map_err(|e| ApiError::bad_request(e))??;
    ok(&ops::fabrication_report(&model))
}

async fn export_stl(State(s): Shared, Path(part): Path<String>) -> ApiResult {
    let name = part.strip_suffix(".stl").unwrap_or(&part).to_string();
    let project = s.project();
    let model = tokio::task::spawn_blocking(move || ops::fabricate(&project))
        .await
        .map_err(|e| ApiError::bad_request(e))??;
    let mesh = model
        .meshes
        .parts()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, m)| m.clone())
        .ok_or_else(|| ApiError::not_found(format!("no part {name:?}")))?;
    Ok(file_response("model/stl", foldwright_core::fab::stl_bytes(&mesh)))
}

async fn health() -> Response {
    json_response(StatusCode::OK, &serde_json::json!({ "status": "ok" }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/project", get(get_project).put(put_project))
        .route("/api/synthesize", post(synthesize))
        .route("/api/fitness", post(fitness))
        .route("/api/optimize", post(start_optimize))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/fold", post(fold))
        .route("/api/simulate", post(start_simulate))
        .route("/api/simulate/step", post(simulate_step))
        .route("/api/routing/validate", post(validate_routing))
        .route("/api/fabrication", get(fabrication))
        .route("/api/export/svg", get(export_svg_file))
        .route("/api/export/dxf", get(export_dxf_file))
        .route("/api/export/stl/{part}", get(export_stl))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
