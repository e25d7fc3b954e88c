//! HTTP session service with a server-sent event stream per session.
//!
//! Turns run on the blocking pool. Each session keeps its own copy of the event
//! log and of the latest state document so reads never wait on a running turn.
//! The single-turn rule is enforced here with `pending`, before the session is
//! touched.

use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::json;
use tabwright_core::agent::{Event, EventKind, Session, TurnError, UndoError};
use tabwright_core::codec::{parse_state, serialize_state};
use tabwright_core::Workbook;
use tokio::sync::watch;

use crate::backend::BackendConfig;
use crate::export::{export_workbook, ExportFormat};

pub const DEFAULT_PORT: u16 = 7341;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

pub struct SessionEntry {
    pub id: String,
    pub created_at: SystemTime,
    session: Mutex<Session>,
    pending: AtomicBool,
    cancel: Arc<AtomicBool>,
    log: Mutex<Vec<Event>>,
    latest_state: Mutex<String>,
    latest_seq: watch::Sender<u64>,
}

impl SessionEntry {
    fn new(id: String, session: Session) -> Self {
        Self {
            id,
            created_at: SystemTime::now(),
            cancel: session.cancel_handle(),
            latest_state: Mutex::new(serialize_state(session.workbook())),
            session: Mutex::new(session),
            pending: AtomicBool::new(false),
            log: Mutex::new(Vec::new()),
            latest_seq: watch::channel(0).0,
        }
    }

    fn publish(&self, event: &Event) {
        if let EventKind::StateUpdate { state, .. } = &event.kind {
            *lock(&self.latest_state) =
                serde_json::to_string(state).unwrap_or_else(|e| unreachable!("state documents serialize: {e}"));
        }
        lock(&self.log).push(event.clone());
        self.latest_seq.send_replace(event.seq);
    }

    fn events_after(&self, seq: u64) -> Vec<Event> {
        let log = lock(&self.log);
        let start = log.partition_point(|e| e.seq <= seq);
        log[start..].to_vec()
    }

    pub fn state_text(&self) -> String {
        lock(&self.latest_state).clone()
    }
}

pub struct AppState {
    config: BackendConfig,
    sessions: RwLock<HashMap<String, Arc<SessionEntry>>>,
}

impl AppState {
    pub fn new(config: BackendConfig) -> Arc<Self> {
        Arc::new(Self { config, sessions: RwLock::default() })
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionEntry>> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no session `{id}`"))
}

fn busy() -> ApiError {
    ApiError(StatusCode::CONFLICT, TurnError::Busy.to_string())
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/sessions/{id}/suggestions/{index}/accept", post(accept_suggestion))
        .route("/v1/sessions/{id}/stop", post(stop))
        .route("/v1/sessions/{id}/undo", post(undo))
        .route("/v1/sessions/{id}/workbook", get(workbook))
        .route("/v1/sessions/{id}/workbook/export", get(export))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: BackendConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await
}

async fn create_session(State(app): State<Arc<AppState>>) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let config = app.config.clone();
    // Backends may own blocking clients, so they are built and dropped off the async workers.
    let backend = tokio::task::spawn_blocking(move || config.build())
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let entry = Arc::new(SessionEntry::new(id.clone(), Session::with_workbook(backend, Workbook::new())));
    app.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(id.clone(), entry);
    log::info!("session {id} created");
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

fn start_turn(entry: Arc<SessionEntry>, text: String) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    if text.trim().is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, TurnError::EmptyMessage.to_string()));
    }
    if entry.pending.swap(true, Ordering::SeqCst) {
        return Err(busy());
    }
    tokio::task::spawn_blocking(move || {
        // Cleared before `done` is visible so a client reacting to it is never refused.
        // A later turn that is accepted meanwhile waits on the session lock.
        let result = lock(&entry.session).run_turn(&text, &mut |e| {
            if matches!(e.kind, EventKind::Done { .. }) {
                entry.pending.store(false, Ordering::SeqCst);
            }
            entry.publish(e)
        });
        if let Err(e) = result {
            log::warn!("session {}: turn rejected: {e}", entry.id);
            entry.pending.store(false, Ordering::SeqCst);
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"accepted": true}))))
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    let body: MessageBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("expected {{\"text\": string}}: {e}")))?;
    start_turn(entry, body.text)
}

async fn accept_suggestion(
    State(app): State<Arc<AppState>>,
    Path((id, index)): Path<(String, String)>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    let index: usize =
        index.parse().map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("bad suggestion index `{index}`")))?;
    if entry.pending.load(Ordering::SeqCst) {
        return Err(busy());
    }
    let text = lock(&entry.session)
        .suggestion_text(index)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no suggestion {index}")))?;
    start_turn(entry, text)
}

async fn stop(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    entry.cancel.store(true, Ordering::SeqCst);
    Ok(StatusCode::ACCEPTED)
}

async fn undo(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    if entry.pending.swap(true, Ordering::SeqCst) {
        return Err(ApiError(StatusCode::CONFLICT, UndoError::Busy.to_string()));
    }
    let result = lock(&entry.session).undo(&mut |e| entry.publish(e));
    entry.pending.store(false, Ordering::SeqCst);
    match result {
        Ok(Event { kind: EventKind::StateUpdate { revision, .. }, seq }) => {
            Ok(Json(json!({"revision": revision, "seq": seq})))
        }
        Ok(other) => Ok(Json(json!({"seq": other.seq}))),
        Err(e) => Err(ApiError(StatusCode::CONFLICT, e.to_string())),
    }
}

async fn workbook(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], entry.state_text()).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    fmt: Option<String>,
    table: Option<String>,
}

async fn export(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<ExportQuery>,
) -> ApiResult<Response> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    let format: ExportFormat = query
        .fmt
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(|e: crate::export::ExportError| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let wb = parse_state(&entry.state_text()).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let text = export_workbook(&wb, format, query.table.as_deref())
        .map_err(|e| ApiError(StatusCode::NOT_FOUND, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], text).into_response())
}

#[derive(Deserialize)]
struct EventsQuery {
    after: Option<u64>,
}

struct Cursor {
    entry: Arc<SessionEntry>,
    after: u64,
    buffer: VecDeque<Event>,
    changes: watch::Receiver<u64>,
}

/// Resumes after `Last-Event-ID` (or `?after=`), replaying missed events, then follows live.
async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let entry = app.session(&id).ok_or_else(|| not_found(&id))?;
    let last_id = headers.get("last-event-id").and_then(|v| v.to_str().ok()).map(str::trim);
    let after = match last_id {
        Some(v) => v.parse().map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("bad Last-Event-ID `{v}`")))?,
        None => query.after.unwrap_or(0),
    };
    let changes = entry.latest_seq.subscribe();
    let cursor = Cursor { entry, after, buffer: VecDeque::new(), changes };
    let stream = stream::unfold(cursor, |mut c| async move {
        loop {
            if let Some(event) = c.buffer.pop_front() {
                c.after = event.seq;
                let frame = SseEvent::default().id(event.seq.to_string()).event(event.name()).data(event.to_json());
                return Some((Ok(frame), c));
            }
            c.changes.borrow_and_update();
            c.buffer.extend(c.entry.events_after(c.after));
            if c.buffer.is_empty() && c.changes.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
