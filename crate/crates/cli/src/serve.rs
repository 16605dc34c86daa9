//! The study-control service: read-only views of every study under a data
//! directory, lifecycle commands, and a live event stream per study.
//!
//! Commands for a study with a live runner go through its inbox; otherwise
//! they are applied to the log directly. Either way the change shows up as a
//! `lifecycle_changed` record with cause `control`.

use std::convert::Infallible;
use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::store::{self, detail, live_view, study_dir, summary, StudySummary};
use selfai_core::clock::SystemClock;
use selfai_core::manager::control::{apply_offline, enqueue, ControlError};
use selfai_core::manager::{ControlCommand, EventPayload, EventRecord, Replayed};

pub const TOKEN_VAR: &str = "SELFAI_API_TOKEN";

#[derive(Clone)]
pub struct ServiceConfig {
    pub data: PathBuf,
    token: String,
    /// How long a command handed to a live runner is awaited before the
    /// reply falls back to 202 Accepted.
    pub settle: Duration,
    /// Event-stream polling interval.
    pub tail_interval: Duration,
}

impl ServiceConfig {
    pub fn new(data: impl Into<PathBuf>, token: impl Into<String>) -> Self {
        Self {
            data: data.into(),
            token: token.into(),
            settle: Duration::from_secs(2),
            tail_interval: Duration::from_millis(200),
        }
    }
}

impl std::fmt::Debug for ServiceConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServiceConfig")
            .field("data", &self.data)
            .field("token", &"***")
            .finish()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::NoStudy(_) | CliError::BadId(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn same_secret(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn require_token(State(cfg): State<Arc<ServiceConfig>>, req: Request, next: Next) -> Response {
    let given = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match given {
        Some(t) if same_secret(t.trim().as_bytes(), cfg.token.as_bytes()) => next.run(req).await,
        _ => {
            let mut resp = ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, header::HeaderValue::from_static("Bearer"));
            resp
        }
    }
}

pub fn router(cfg: ServiceConfig) -> Router {
    let cfg = Arc::new(cfg);
    Router::new()
        .route("/studies", get(list_studies))
        .route("/studies/{id}", get(get_study))
        .route("/studies/{id}/trials", get(get_trials))
        .route("/studies/{id}/reasoning", get(get_reasoning))
        .route("/studies/{id}/metrics", get(get_metrics))
        .route("/studies/{id}/events", get(stream_events))
        .route("/studies/{id}/pause", post(pause))
        .route("/studies/{id}/resume", post(resume))
        .route("/studies/{id}/stop", post(stop))
        .route("/studies/{id}/stop-override", post(stop_override))
        .route("/studies/{id}/config", patch(configure))
        .layer(middleware::from_fn_with_state(Arc::clone(&cfg), require_token))
        .with_state(cfg)
}

/// Serves until the process is killed.
pub async fn serve(addr: SocketAddr, cfg: ServiceConfig) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| CliError::Bind {
            port: addr.port(),
            source,
        })?;
    log::info!("serving {} on {addr}", cfg.data.display());
    axum::serve(listener, router(cfg)).await.map_err(CliError::Serve)
}

async fn list_studies(State(cfg): State<Arc<ServiceConfig>>) -> ApiResult<Json<Vec<StudySummary>>> {
    blocking(move || {
        let mut out = Vec::new();
        for id in store::study_ids(&cfg.data)? {
            match store::load(&cfg.data, &id) {
                Ok(r) => out.push(summary(&live_view(&r))),
                Err(e) => log::warn!("skipping study {id}: {e}"),
            }
        }
        Ok(Json(out))
    })
    .await
}

async fn with_study<T, F>(cfg: Arc<ServiceConfig>, id: String, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Replayed) -> ApiResult<T> + Send + 'static,
{
    blocking(move || {
        let replayed = store::load(&cfg.data, &id)?;
        f(&replayed)
    })
    .await
}

async fn get_study(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_study(cfg, id, |r| {
        let d = detail(&live_view(r), &r.records);
        Ok(Json(serde_json::to_value(d).expect("detail serializes")))
    })
    .await
}

async fn get_trials(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_study(cfg, id, |r| Ok(Json(json!(live_view(r).trials)))).await
}

async fn get_reasoning(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_study(cfg, id, |r| Ok(Json(json!(store::reasoning(&r.records))))).await
}

async fn get_metrics(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_study(cfg, id, |r| {
        let study = live_view(r);
        let (metrics, unavailable) = match store::tabulated_metrics(&study, &r.run) {
            Ok(Some(m)) => (Some(m), None),
            Ok(None) => (None, Some("study is not backed by a table".to_string())),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Json(json!({
            "id": study.id,
            "completed": study.completed_count(),
            "metrics": metrics,
            "unavailable": unavailable,
        })))
    })
    .await
}

#[derive(Debug, Serialize)]
struct ControlReply {
    /// `applied` when the log already shows the change, `queued` when a live
    /// runner has not picked it up yet.
    status: &'static str,
    study: StudySummary,
}

enum Routed {
    Applied(StudySummary),
    Queued { after_seq: u64 },
}

fn route_command(cfg: &ServiceConfig, id: &str, command: &ControlCommand) -> ApiResult<Routed> {
    let dir = study_dir(&cfg.data, id)?;
    let replayed = store::load(&cfg.data, id)?;
    let study = live_view(&replayed);
    command
        .check(&study)
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))?;
    match apply_offline(&dir, command, &SystemClock) {
        Ok(study) => Ok(Routed::Applied(summary(&study))),
        Err(ControlError::Busy) => {
            enqueue(&dir, command).map_err(|e| ApiError::internal(format!("inbox: {e}")))?;
            Ok(Routed::Queued {
                after_seq: replayed.records.last().map(|r| r.seq).unwrap_or(0),
            })
        }
        Err(ControlError::Rejected(e)) => Err(ApiError::new(StatusCode::CONFLICT, e.to_string())),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

fn control_applied_since(records: &[EventRecord], after_seq: u64) -> bool {
    records.iter().any(|r| {
        r.seq > after_seq
            && matches!(&r.payload, EventPayload::LifecycleChanged { cause, .. } if cause == "control")
    })
}

async fn control(cfg: Arc<ServiceConfig>, id: String, command: ControlCommand) -> ApiResult<Response> {
    let routed = {
        let (cfg, id, command) = (Arc::clone(&cfg), id.clone(), command.clone());
        blocking(move || route_command(&cfg, &id, &command)).await?
    };
    let after_seq = match routed {
        Routed::Applied(study) => {
            return Ok(Json(ControlReply {
                status: "applied",
                study,
            })
            .into_response())
        }
        Routed::Queued { after_seq } => after_seq,
    };
    let deadline = tokio::time::Instant::now() + cfg.settle;
    loop {
        let (c, i) = (Arc::clone(&cfg), id.clone());
        let (done, study) = blocking(move || {
            let r = store::load(&c.data, &i)?;
            Ok((control_applied_since(&r.records, after_seq), summary(&live_view(&r))))
        })
        .await?;
        if done {
            return Ok(Json(ControlReply {
                status: "applied",
                study,
            })
            .into_response());
        }
        if tokio::time::Instant::now() >= deadline {
            let reply = ControlReply {
                status: "queued",
                study,
            };
            return Ok((StatusCode::ACCEPTED, Json(reply)).into_response());
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
}

async fn pause(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Response> {
    control(cfg, id, ControlCommand::Pause).await
}

async fn resume(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Response> {
    control(cfg, id, ControlCommand::Resume).await
}

async fn stop(State(cfg): State<Arc<ServiceConfig>>, Path(id): Path<String>) -> ApiResult<Response> {
    control(cfg, id, ControlCommand::Stop).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideBody {
    approve: bool,
}

async fn stop_override(
    State(cfg): State<Arc<ServiceConfig>>,
    Path(id): Path<String>,
    Json(body): Json<OverrideBody>,
) -> ApiResult<Response> {
    control(cfg, id, ControlCommand::StopOverride { approve: body.approve }).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigBody {
    #[serde(default)]
    max_trials: Option<usize>,
    #[serde(default)]
    n_jobs: Option<usize>,
}

async fn configure(
    State(cfg): State<Arc<ServiceConfig>>,
    Path(id): Path<String>,
    Json(body): Json<ConfigBody>,
) -> ApiResult<Response> {
    if body.max_trials.is_none() && body.n_jobs.is_none() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "nothing to change"));
    }
    let command = ControlCommand::Configure {
        max_trials: body.max_trials,
        n_jobs: body.n_jobs,
    };
    control(cfg, id, command).await
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// Only records with a larger sequence number are sent.
    #[serde(default)]
    after: Option<u64>,
}

/// Follows a log file, yielding complete records as they are appended.
struct Tail {
    path: PathBuf,
    offset: u64,
    after: u64,
    interval: Duration,
}

impl Tail {
    fn read_new(&mut self) -> Vec<EventRecord> {
        let Ok(mut f) = File::open(&self.path) else {
            return Vec::new();
        };
        if f.seek(SeekFrom::Start(self.offset)).is_err() {
            return Vec::new();
        }
        let mut buf = Vec::new();
        if f.read_to_end(&mut buf).is_err() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut consumed = 0usize;
        for line in buf.split_inclusive(|&b| b == b'\n') {
            if line.last() != Some(&b'\n') {
                break;
            }
            consumed += line.len();
            match serde_json::from_slice::<EventRecord>(line) {
                Ok(r) if r.seq > self.after => out.push(r),
                Ok(_) => {}
                Err(e) => log::warn!("{}: unreadable record: {e}", self.path.display()),
            }
        }
        self.offset += consumed as u64;
        out
    }
}

fn sse_event(rec: &EventRecord) -> Event {
    Event::default()
        .id(rec.seq.to_string())
        .event(rec.payload.kind())
        .data(serde_json::to_string(rec).expect("records serialize"))
}

fn follow(tail: Tail) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold(tail, |mut tail| async move {
        loop {
            let (batch, t) = tokio::task::spawn_blocking(move || {
                let batch = tail.read_new();
                (batch, tail)
            })
            .await
            .ok()?;
            tail = t;
            if !batch.is_empty() {
                return Some((batch, tail));
            }
            tokio::time::sleep(tail.interval).await;
        }
    })
    .flat_map(|batch| stream::iter(batch.iter().map(|r| Ok(sse_event(r))).collect::<Vec<_>>()))
}

async fn stream_events(
    State(cfg): State<Arc<ServiceConfig>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let dir = study_dir(&cfg.data, &id)?;
    let path = dir.join("events.log");
    if !FsPath::is_file(&path) {
        return Err(CliError::NoStudy(id).into());
    }
    let last_event_id = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let tail = Tail {
        path,
        offset: 0,
        after: last_event_id.or(q.after).unwrap_or(0),
        interval: cfg.tail_interval,
    };
    Ok(Sse::new(follow(tail)).keep_alive(KeepAlive::default()))
}
