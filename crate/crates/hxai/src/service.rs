//! HTTP facade over sessions. Bodies are the engine's serialized types;
//! questions and hypotheses run on a per-session worker and are polled.
//!
//! | route | effect |
//! |---|---|
//! | `GET /health` | liveness, never authenticated |
//! | `POST /datasets` | register a dataset (409 if the id exists) |
//! | `POST /models` | train or register a model |
//! | `POST /baselines` | register reference-model settings |
//! | `POST /sessions` | open a session |
//! | `GET /sessions/{id}` | session status |
//! | `POST /sessions/{id}/questions` | 202 and a poll URL; 409 if busy |
//! | `POST /sessions/{id}/hypotheses` | as questions |
//! | `GET /sessions/{id}/artifacts/{n}` | n-th submitted job, 1-based |
//! | `GET /sessions/{id}/report` | JSON, or text with `?format=text` |
//!
//! With `?enqueue=true` a request to a busy session joins a backlog of at
//! most [`BACKLOG`] jobs instead of failing with 409; beyond that it gets 429.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{AppError, AppResult};
use crate::workspace::{check_id, BaselinesRequest, DatasetRequest, ModelRequest, SessionRequest, Workspace};
use hxai_core::session::{HypothesisRequest, Question, Request as SessionJob, Session};

/// Jobs that may wait behind the running one.
pub const BACKLOG: usize = 16;

const BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub workdir: PathBuf,
    pub token: Option<String>,
}

enum Job {
    Queued,
    Running,
    Done(String),
    Failed(StatusCode, Value),
}

#[derive(Default)]
struct Queue {
    jobs: Vec<Job>,
    running: bool,
    backlog: VecDeque<(usize, SessionJob)>,
}

struct Slot {
    session: Mutex<Session>,
    queue: Mutex<Queue>,
}

pub struct AppState {
    ws: Workspace,
    token: Option<String>,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    next_session: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn status_of(e: &AppError) -> StatusCode {
    use hxai_core::Error as E;
    match e {
        AppError::Usage(_) => StatusCode::BAD_REQUEST,
        AppError::NotFound { .. } => StatusCode::NOT_FOUND,
        AppError::Conflict { .. } | AppError::Busy(_) => StatusCode::CONFLICT,
        AppError::BacklogFull(_) => StatusCode::TOO_MANY_REQUESTS,
        AppError::Unauthorized => StatusCode::UNAUTHORIZED,
        AppError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        AppError::Engine(e) => match e {
            E::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            E::EndpointUnreachable(_) | E::MalformedResponse(_) => StatusCode::BAD_GATEWAY,
            E::EmptySession => StatusCode::CONFLICT,
            E::UnknownCategory(_)
            | E::InvalidParams { .. }
            | E::UnknownModel(_)
            | E::UnknownFeature(_)
            | E::UnknownAttribute(_)
            | E::InvalidConfig(_)
            | E::InvalidCausalSpec(_)
            | E::InvalidSchema(_)
            | E::SchemaMismatch(_)
            | E::Parse { .. }
            | E::UnknownCode { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        },
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (status_of(&self), axum::Json(self.to_json())).into_response()
    }
}

fn json_body(status: StatusCode, v: Value) -> Response {
    (status, axum::Json(v)).into_response()
}

/// Pre-serialized JSON, sent byte for byte.
fn raw_json(text: String) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], text).into_response()
}

fn parse<T: DeserializeOwned>(what: &str, body: &Bytes) -> AppResult<T> {
    serde_json::from_slice(body).map_err(|e| AppError::invalid_json(what, e))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Io(format!("worker failed: {e}")))?
}

impl AppState {
    pub fn new(ws: Workspace, token: Option<String>) -> Self {
        AppState {
            ws,
            token,
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    fn slot(&self, id: &str) -> AppResult<Arc<Slot>> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| AppError::NotFound {
            what: "session",
            id: id.to_string(),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/datasets", post(post_dataset))
        .route("/models", post(post_model))
        .route("/baselines", post(post_baselines))
        .route("/sessions", post(post_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/questions", post(post_question))
        .route("/sessions/{id}/hypotheses", post(post_hypothesis))
        .route("/sessions/{id}/artifacts/{n}", get(get_artifact))
        .route("/sessions/{id}/report", get(get_report))
        .route_layer(middleware::from_fn_with_state(state.clone(), auth));
    Router::new()
        .route("/health", get(|| async { axum::Json(json!({ "status": "ok" })) }))
        .merge(api)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(config: ServeConfig) -> AppResult<()> {
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| AppError::Usage(format!("bad listen address: {e}")))?;
    std::fs::create_dir_all(&config.workdir)?;
    let state = Arc::new(AppState::new(Workspace::new(config.workdir), config.token));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn auth(State(state): State<Arc<AppState>>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return AppError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

async fn post_dataset(State(state): State<Arc<AppState>>, body: Bytes) -> AppResult<Response> {
    let req: DatasetRequest = parse("dataset", &body)?;
    let ws = state.ws.clone();
    let record = blocking(move || ws.add_dataset(&req)).await?;
    Ok(json_body(StatusCode::CREATED, json!(record)))
}

async fn post_model(State(state): State<Arc<AppState>>, body: Bytes) -> AppResult<Response> {
    let req: ModelRequest = parse("model", &body)?;
    let ws = state.ws.clone();
    let record = blocking(move || ws.add_model(&req)).await?;
    let model = record.model.clone().into_model()?;
    Ok(json_body(
        StatusCode::CREATED,
        json!({
            "name": record.name,
            "dataset": record.dataset,
            "split": record.split,
            "info": model.info(),
        }),
    ))
}

async fn post_baselines(State(state): State<Arc<AppState>>, body: Bytes) -> AppResult<Response> {
    let req: BaselinesRequest = parse("baselines", &body)?;
    let ws = state.ws.clone();
    let id = req.id.clone();
    blocking(move || ws.add_baselines(&req)).await?;
    Ok(json_body(StatusCode::CREATED, json!({ "id": id })))
}

fn describe(id: &str, s: &Session) -> Value {
    json!({
        "id": id,
        "role": s.role(),
        "models": s.domain().model_names(),
        "spec": s.spec(),
        "spec_is_default": s.spec_is_default(),
    })
}

async fn post_session(State(state): State<Arc<AppState>>, body: Bytes) -> AppResult<Response> {
    let req: SessionRequest = parse("session", &body)?;
    let id = match &req.id {
        Some(id) => id.clone(),
        None => loop {
            let candidate = format!("s{}", state.next_session.fetch_add(1, Ordering::Relaxed));
            if !lock(&state.sessions).contains_key(&candidate) {
                break candidate;
            }
        },
    };
    check_id("session", &id)?;
    if lock(&state.sessions).contains_key(&id) {
        return Err(AppError::Conflict { what: "session", id });
    }
    let ws = state.ws.clone();
    let sid = id.clone();
    let session = blocking(move || ws.open_session(&sid, &req)).await?;
    let body = describe(&id, &session);
    let slot = Arc::new(Slot {
        session: Mutex::new(session),
        queue: Mutex::new(Queue::default()),
    });
    match lock(&state.sessions).entry(id.clone()) {
        std::collections::hash_map::Entry::Occupied(_) => return Err(AppError::Conflict { what: "session", id }),
        std::collections::hash_map::Entry::Vacant(v) => {
            v.insert(slot);
        }
    }
    Ok(json_body(StatusCode::CREATED, body))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let slot = state.slot(&id)?;
    let q = lock(&slot.queue);
    let status = if q.running {
        "running"
    } else if matches!(q.jobs.last(), Some(Job::Failed(..))) {
        "error"
    } else {
        "idle"
    };
    Ok(json_body(
        StatusCode::OK,
        json!({ "id": id, "status": status, "jobs": q.jobs.len(), "backlog": q.backlog.len() }),
    ))
}

#[derive(Deserialize)]
struct SubmitQuery {
    #[serde(default)]
    enqueue: bool,
}

fn run_jobs(slot: Arc<Slot>, first: (usize, SessionJob)) {
    tokio::task::spawn_blocking(move || {
        let mut next = Some(first);
        while let Some((n, job)) = next {
            lock(&slot.queue).jobs[n] = Job::Running;
            let result = {
                let mut session = lock(&slot.session);
                match job {
                    SessionJob::Question(q) => session.ask(q),
                    SessionJob::Hypothesis(h) => session.hypothesize(h),
                }
            };
            let mut q = lock(&slot.queue);
            q.jobs[n] = match result {
                Ok(a) => Job::Done(a.to_json()),
                Err(e) => {
                    let e = AppError::Engine(e);
                    Job::Failed(status_of(&e), e.to_json())
                }
            };
            next = q.backlog.pop_front();
            if next.is_none() {
                q.running = false;
            }
        }
    });
}

fn submit(id: &str, slot: Arc<Slot>, job: SessionJob, enqueue: bool) -> AppResult<Response> {
    let mut q = lock(&slot.queue);
    let n = q.jobs.len();
    if q.running {
        if !enqueue {
            return Err(AppError::Busy(id.to_string()));
        }
        if q.backlog.len() >= BACKLOG {
            return Err(AppError::BacklogFull(id.to_string()));
        }
        q.jobs.push(Job::Queued);
        q.backlog.push_back((n, job));
    } else {
        q.jobs.push(Job::Queued);
        q.running = true;
        drop(q);
        run_jobs(slot, (n, job));
    }
    let poll = format!("/sessions/{id}/artifacts/{}", n + 1);
    let mut resp = json_body(
        StatusCode::ACCEPTED,
        json!({ "job": n + 1, "status": "queued", "poll": poll }),
    );
    if let Ok(v) = HeaderValue::from_str(&poll) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    Ok(resp)
}

async fn post_question(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<SubmitQuery>,
    body: Bytes,
) -> AppResult<Response> {
    let slot = state.slot(&id)?;
    let raw: Value = parse("question", &body)?;
    let question = Question::from_json(&raw)?;
    submit(&id, slot, SessionJob::Question(question), query.enqueue)
}

async fn post_hypothesis(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<SubmitQuery>,
    body: Bytes,
) -> AppResult<Response> {
    let slot = state.slot(&id)?;
    let request: HypothesisRequest = parse("hypothesis", &body)?;
    submit(&id, slot, SessionJob::Hypothesis(request), query.enqueue)
}

async fn get_artifact(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, usize)>) -> AppResult<Response> {
    let slot = state.slot(&id)?;
    let q = lock(&slot.queue);
    let job = n.checked_sub(1).and_then(|i| q.jobs.get(i)).ok_or_else(|| AppError::NotFound {
        what: "artifact",
        id: format!("{id}/{n}"),
    })?;
    Ok(match job {
        Job::Queued => json_body(StatusCode::ACCEPTED, json!({ "job": n, "status": "queued" })),
        Job::Running => json_body(StatusCode::ACCEPTED, json!({ "job": n, "status": "running" })),
        Job::Done(text) => raw_json(text.clone()),
        Job::Failed(status, body) => json_body(*status, body.clone()),
    })
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn get_report(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<ReportQuery>,
) -> AppResult<Response> {
    let slot = state.slot(&id)?;
    let text = query.format.as_deref() == Some("text");
    if let Some(f) = query.format.as_deref().filter(|f| !matches!(*f, "text" | "json")) {
        return Err(AppError::Usage(format!("unknown report format `{f}`")));
    }
    let body = blocking(move || {
        let report = lock(&slot.session).render_report()?;
        Ok(if text { report.to_text() } else { report.to_json() })
    })
    .await?;
    Ok(if text {
        ([(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"))], body).into_response()
    } else {
        raw_json(body)
    })
}
