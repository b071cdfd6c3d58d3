//! HTTP/JSON service hosting conductor sessions.
//!
//! Each session is owned by one actor task, so its transitions are
//! serialized; handlers read snapshots and queue user actions. Effects
//! (extraction, provisioning, execution) run inside the actor after the
//! action that unlocked them, and their messages appear on the event stream.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use intent2dag_core::api::{
    ApiError, ApproveBody, CreateSession, ErrorKind, EventsPage, Health, MessageBody, RejectBody, SessionEvent,
    SessionListing,
};
use intent2dag_core::composer::serialize_dag;
use intent2dag_core::conductor::{session_id, timing_report, ConductorError, Engine, Input, Outbound, Phase, Session, TimingReport};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};

/// Longest a long-poll request may wait.
pub const MAX_WAIT_MS: u64 = 30_000;

struct Shared {
    snapshot: RwLock<Arc<Session>>,
    events: RwLock<Vec<SessionEvent>>,
    seq: watch::Sender<u64>,
}

impl Shared {
    fn snapshot(&self) -> Arc<Session> {
        self.snapshot.read().unwrap().clone()
    }

    fn publish(&self, session: &Session, out: Vec<Outbound>) {
        *self.snapshot.write().unwrap() = Arc::new(session.clone());
        let mut events = self.events.write().unwrap();
        let now = Utc::now();
        for event in out {
            let seq = events.len() as u64 + 1;
            events.push(SessionEvent { seq, at: now, event });
        }
        let last = events.len() as u64;
        drop(events);
        self.seq.send_replace(last);
    }

    fn page(&self, after: u64) -> EventsPage {
        let events = self.events.read().unwrap();
        let fresh: Vec<SessionEvent> = events.iter().filter(|e| e.seq > after).cloned().collect();
        EventsPage {
            next: events.len() as u64,
            events: fresh,
            phase: self.snapshot().phase,
        }
    }
}

struct Command {
    input: Input,
    /// Phase the caller saw; the action is refused if the session moved on.
    observed: Phase,
    reply: oneshot::Sender<Result<Arc<Session>, ConductorError>>,
}

struct Handle {
    tx: mpsc::Sender<Command>,
    shared: Arc<Shared>,
}

pub struct AppState {
    engine: Arc<Engine>,
    sessions: RwLock<BTreeMap<String, Arc<Handle>>>,
    counter: AtomicU64,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        AppState {
            engine,
            sessions: RwLock::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, AppError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| AppError::from(ConductorError::UnknownSession(id.to_string())))
    }
}

async fn run_actor(engine: Arc<Engine>, mut session: Session, shared: Arc<Shared>, mut rx: mpsc::Receiver<Command>) {
    loop {
        while let Some(input) = engine.effect(&session).await {
            match engine.apply(&mut session, input) {
                Ok(out) => shared.publish(&session, out),
                Err(e) => {
                    tracing::error!(session = %session.id, error = %e, "effect result not applied");
                    break;
                }
            }
        }
        let Some(cmd) = rx.recv().await else { break };
        let result = if session.phase != cmd.observed {
            Err(ConductorError::IllegalAction {
                phase: session.phase,
                action: cmd.input.name().to_string(),
            })
        } else {
            engine.apply(&mut session, cmd.input).map(|out| {
                shared.publish(&session, out);
                shared.snapshot()
            })
        };
        let _ = cmd.reply.send(result);
    }
}

pub struct AppError {
    status: StatusCode,
    body: ApiError,
}

impl AppError {
    fn not_found(message: impl Into<String>) -> Self {
        AppError {
            status: StatusCode::NOT_FOUND,
            body: ApiError {
                kind: ErrorKind::NotFound,
                message: message.into(),
                phase: None,
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        AppError {
            status: StatusCode::BAD_REQUEST,
            body: ApiError {
                kind: ErrorKind::BadRequest,
                message: message.into(),
                phase: None,
            },
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        AppError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ApiError {
                kind: ErrorKind::Internal,
                message: message.into(),
                phase: None,
            },
        }
    }
}

impl From<ConductorError> for AppError {
    fn from(e: ConductorError) -> Self {
        let status = match e {
            ConductorError::IllegalAction { .. } => StatusCode::CONFLICT,
            ConductorError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ConductorError::Journal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        AppError {
            status,
            body: ApiError::from(&e),
        }
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type AppStateRef = Arc<AppState>;

async fn health(State(state): State<AppStateRef>) -> Json<Health> {
    let e = &state.engine;
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        skill_config: e.skills().config().to_string(),
        skill_fingerprint: e.skills().fingerprint().to_string(),
        extractor: e.extractor().id(),
    })
}

async fn create_session(
    State(state): State<AppStateRef>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<Arc<Session>>), AppError> {
    if body.query.trim().is_empty() {
        return Err(AppError::bad_request("query must not be empty"));
    }
    let n = state.counter.fetch_add(1, Ordering::SeqCst);
    let id = session_id(&body.query, n);
    let (session, out) = state.engine.open(&id, &body.query)?;
    let (seq, _) = watch::channel(0);
    let shared = Arc::new(Shared {
        snapshot: RwLock::new(Arc::new(session.clone())),
        events: RwLock::new(Vec::new()),
        seq,
    });
    shared.publish(&session, out);
    let (tx, rx) = mpsc::channel(16);
    tokio::spawn(run_actor(state.engine.clone(), session, shared.clone(), rx));
    let snapshot = shared.snapshot();
    state.sessions.write().unwrap().insert(id, Arc::new(Handle { tx, shared }));
    Ok((StatusCode::CREATED, Json(snapshot)))
}

async fn list_sessions(State(state): State<AppStateRef>) -> Json<Vec<SessionListing>> {
    let sessions = state.sessions.read().unwrap();
    Json(
        sessions
            .iter()
            .map(|(id, h)| {
                let s = h.shared.snapshot();
                SessionListing {
                    id: id.clone(),
                    phase: s.phase,
                    query: s.query.clone(),
                }
            })
            .collect(),
    )
}

async fn get_session(State(state): State<AppStateRef>, Path(id): Path<String>) -> Result<Json<Arc<Session>>, AppError> {
    Ok(Json(state.handle(&id)?.shared.snapshot()))
}

async fn act(state: &AppState, id: &str, input: Input) -> Result<Json<Arc<Session>>, AppError> {
    let handle = state.handle(id)?;
    let observed = handle.shared.snapshot().phase;
    let (reply, rx) = oneshot::channel();
    handle
        .tx
        .send(Command { input, observed, reply })
        .await
        .map_err(|_| AppError::internal("session actor stopped"))?;
    let session = rx.await.map_err(|_| AppError::internal("session actor stopped"))??;
    Ok(Json(session))
}

async fn post_message(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> Result<Json<Arc<Session>>, AppError> {
    act(&state, &id, Input::Message { text: body.text }).await
}

fn approver(by: Option<String>) -> String {
    by.filter(|b| !b.trim().is_empty()).unwrap_or_else(|| "user".into())
}

async fn approve_plan(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    body: Option<Json<ApproveBody>>,
) -> Result<Json<Arc<Session>>, AppError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let input = Input::ApprovePlan {
        by: approver(body.by),
        synthetic: body.synthetic,
    };
    act(&state, &id, input).await
}

async fn approve_execution(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    body: Option<Json<ApproveBody>>,
) -> Result<Json<Arc<Session>>, AppError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let input = Input::ApproveExecution {
        by: approver(body.by),
        synthetic: body.synthetic,
    };
    act(&state, &id, input).await
}

async fn reject(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    body: Option<Json<RejectBody>>,
) -> Result<Json<Arc<Session>>, AppError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let input = Input::Reject {
        by: approver(body.by),
        reason: body.reason,
    };
    act(&state, &id, input).await
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    after: u64,
    #[serde(default)]
    wait_ms: u64,
}

/// Long-poll: returns events after `after`, waiting up to `wait_ms` for one.
async fn events(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Json<EventsPage>, AppError> {
    let handle = state.handle(&id)?;
    let mut rx = handle.shared.seq.subscribe();
    let page = handle.shared.page(q.after);
    if !page.events.is_empty() || q.wait_ms == 0 || page.phase.is_terminal() {
        return Ok(Json(page));
    }
    let wait = Duration::from_millis(q.wait_ms.min(MAX_WAIT_MS));
    let _ = tokio::time::timeout(wait, rx.wait_for(|seq| *seq > q.after)).await;
    Ok(Json(handle.shared.page(q.after)))
}

async fn timing(State(state): State<AppStateRef>, Path(id): Path<String>) -> Result<Json<TimingReport>, AppError> {
    Ok(Json(timing_report(&state.handle(&id)?.shared.snapshot())))
}

/// The generated DAG as the canonical serialized bytes.
async fn workflow(State(state): State<AppStateRef>, Path(id): Path<String>) -> Result<Response, AppError> {
    let session = state.handle(&id)?.shared.snapshot();
    let dag = session
        .dag
        .as_ref()
        .ok_or_else(|| AppError::not_found(format!("session {id} has no workflow yet (phase {})", session.phase)))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], Body::from(serialize_dag(dag))).into_response())
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(post_message))
        .route("/sessions/{id}/approve-plan", post(approve_plan))
        .route("/sessions/{id}/approve-execution", post(approve_execution))
        .route("/sessions/{id}/reject", post(reject))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/timing", get(timing))
        .route("/sessions/{id}/workflow", get(workflow))
        .with_state(Arc::new(AppState::new(engine)))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    engine: Arc<Engine>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine)).with_graceful_shutdown(shutdown).await
}

/// Binds `addr` and serves in a background task; for in-process use.
pub async fn spawn(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(engine)).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok((local, task))
}
