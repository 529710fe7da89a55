//! Local HTTP API for the plan explorer: synchronous simulation, background
//! optimization jobs with pollable progress, and default parameters.
//!
//! Errors are returned as `{"error": {"code", "message", "detail"}}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;

use crate::error::Error;
use crate::model::{default_patient, PatientModel};
use crate::mopso::SwarmConfig;
use crate::plan::{self, LabelledMember, RegionCuts, RunConfig};
use crate::sim::{self, DoseSchedule, ObjectiveVector, PlanReport, SampleRow, SimConfig};

/// Most trajectory rows returned by `/api/simulate`.
pub const MAX_WIRE_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    fn rank(self) -> u8 {
        match self {
            JobStatus::Queued => 0,
            JobStatus::Running => 1,
            JobStatus::Done | JobStatus::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub status: JobStatus,
    /// Generations completed so far.
    pub progress: usize,
    pub generations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Vec<LabelledMember>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    snapshot: Option<Arc<Vec<LabelledMember>>>,
}

impl JobRecord {
    /// Moves the status forward; attempts to go backwards are ignored.
    fn advance(&mut self, next: JobStatus) {
        if next.rank() > self.status.rank() {
            self.status = next;
        }
    }
}

type JobStore = Arc<Mutex<HashMap<String, JobRecord>>>;

#[derive(Clone)]
pub struct AppState {
    defaults: Arc<RunConfig>,
    patient: Arc<PatientModel>,
    jobs: JobStore,
    next_id: Arc<AtomicU64>,
    pool: Arc<Semaphore>,
}

impl AppState {
    /// `max_jobs` optimizations run at once; the rest wait in `queued`.
    pub fn new(defaults: RunConfig, max_jobs: usize) -> crate::Result<Self> {
        let patient = defaults.resolve_patient()?;
        Ok(AppState {
            defaults: Arc::new(defaults),
            patient: Arc::new(patient),
            jobs: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            pool: Arc::new(Semaphore::new(max_jobs.max(1))),
        })
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    fn update_job(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(id) {
            f(job);
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/simulate", post(simulate))
        .route("/api/optimize", post(optimize))
        .route("/api/jobs/{id}", get(job_status))
        .route("/api/jobs/{id}/front", get(job_front))
        .route("/api/params/default", get(default_params))
        .route("/api/health", get(|| async { Json(json!({"status": "ok"})) }))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds the listener. Callers can tell a busy port apart via
/// `io::ErrorKind::AddrInUse`.
pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>, detail: Value) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail,
        }
    }

    fn bad_request(message: impl Into<String>, detail: Value) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message, detail)
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_job",
            format!("no job with id {id}"),
            json!({ "id": id }),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Simulation(f) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "simulation_failed",
                e.to_string(),
                serde_json::to_value(f).unwrap_or(Value::Null),
            ),
            Error::InvalidSchedule(s) => Self::new(
                StatusCode::BAD_REQUEST,
                "invalid_schedule",
                e.to_string(),
                serde_json::to_value(s).unwrap_or(Value::Null),
            ),
            _ => Self::bad_request(e.to_string(), Value::Null),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": { "code": self.code, "message": self.message, "detail": self.detail }
        });
        (self.status, Json(body)).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    let slice: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(slice).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}"), Value::Null))
}

#[derive(Debug, Deserialize)]
struct SimulateRequest {
    schedule: Vec<f64>,
    patient: Option<PatientModel>,
    sim: Option<SimConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub trajectory: Vec<SampleRow>,
    pub report: PlanReport,
    pub objectives: ObjectiveVector,
}

async fn simulate(State(state): State<AppState>, body: Bytes) -> Result<Json<SimulateResponse>, ApiError> {
    let req: SimulateRequest = parse_body(&body)?;
    let patient = match req.patient {
        Some(p) => {
            p.validate()?;
            p
        }
        None => (*state.patient).clone(),
    };
    let sim_cfg = req.sim.unwrap_or_else(|| state.defaults.sim.clone());
    sim_cfg.validate()?;
    let schedule = DoseSchedule::new(req.schedule, sim_cfg.dose_bounds).map_err(Error::from)?;
    sim_cfg.check_schedule(&schedule).map_err(Error::from)?;
    let out = tokio::task::spawn_blocking(move || -> crate::Result<SimulateResponse> {
        let trajectory = sim::simulate(&schedule, &patient, &sim_cfg)?;
        Ok(SimulateResponse {
            trajectory: trajectory.downsampled(MAX_WIRE_SAMPLES),
            report: sim::report(&schedule, &trajectory, &patient),
            objectives: sim::objectives_of(&trajectory, &sim_cfg),
        })
    })
    .await
    .map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            e.to_string(),
            Value::Null,
        )
    })??;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct OptimizeRequest {
    swarm: Option<SwarmConfig>,
    patient: Option<PatientModel>,
    sim: Option<SimConfig>,
    regions: Option<RegionCuts>,
}

async fn optimize(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: OptimizeRequest = parse_body(&body)?;
    let patient = match req.patient {
        Some(p) => {
            p.validate()?;
            p
        }
        None => (*state.patient).clone(),
    };
    let cfg = RunConfig {
        patient: None,
        sim: req.sim.unwrap_or_else(|| state.defaults.sim.clone()),
        swarm: req.swarm.unwrap_or_else(|| state.defaults.swarm.clone()),
        output_dir: state.defaults.output_dir.clone(),
        regions: req.regions.unwrap_or(state.defaults.regions),
    };
    cfg.validate()?;

    let id = format!("job-{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    state.jobs.lock().unwrap().insert(
        id.clone(),
        JobRecord {
            id: id.clone(),
            status: JobStatus::Queued,
            progress: 0,
            generations: cfg.swarm.generations,
            result: None,
            error: None,
            snapshot: None,
        },
    );

    let job_state = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let Ok(_permit) = job_state.pool.clone().acquire_owned().await else {
            return;
        };
        job_state.update_job(&job_id, |j| j.advance(JobStatus::Running));
        let worker_state = job_state.clone();
        let worker_id = job_id.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let regions = cfg.regions;
            plan::optimize(&patient, &cfg.sim, &cfg.swarm, |stats, archive| {
                let front = Arc::new(plan::classify_regions(archive.members(), regions));
                worker_state.update_job(&worker_id, |j| {
                    j.progress = stats.gen;
                    j.snapshot = Some(front);
                });
                ControlFlow::Continue(())
            })
            .map(|out| plan::classify_regions(out.archive.members(), regions))
        })
        .await;
        job_state.update_job(&job_id, |j| match outcome {
            Ok(Ok(front)) => {
                j.snapshot = Some(Arc::new(front.clone()));
                j.result = Some(front);
                j.advance(JobStatus::Done);
            }
            Ok(Err(e)) => {
                j.error = Some(e.to_string());
                j.advance(JobStatus::Failed);
            }
            Err(e) => {
                j.error = Some(format!("optimizer panicked: {e}"));
                j.advance(JobStatus::Failed);
            }
        });
    });

    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))))
}

async fn job_status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    state.job(&id).map(Json).ok_or_else(|| ApiError::not_found(&id))
}

async fn job_front(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let job = state.job(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let front = job
        .snapshot
        .filter(|_| job.progress >= 1 || job.status == JobStatus::Done)
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                "front_not_ready",
                "no generation has completed yet",
                json!({ "id": id, "status": job.status }),
            )
        })?;
    Ok(Json(json!({
        "id": id,
        "status": job.status,
        "progress": job.progress,
        "front": *front,
    })))
}

async fn default_params() -> Json<PatientModel> {
    Json(default_patient())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_never_regresses() {
        let mut j = JobRecord {
            id: "x".into(),
            status: JobStatus::Queued,
            progress: 0,
            generations: 1,
            result: None,
            error: None,
            snapshot: None,
        };
        j.advance(JobStatus::Running);
        j.advance(JobStatus::Queued);
        assert_eq!(j.status, JobStatus::Running);
        j.advance(JobStatus::Done);
        j.advance(JobStatus::Running);
        j.advance(JobStatus::Failed);
        assert_eq!(j.status, JobStatus::Done);
    }
}
