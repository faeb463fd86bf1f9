//! HTTP JSON API over per-user online-learning sessions.
//!
//! Every session gets its own copy of the loaded weights and its own mutex,
//! so requests to one session are serialized while other sessions proceed.
//! Decoding and updates run on the blocking pool. Bodies are parsed by hand
//! so that any malformed request maps to a `bad_request` error, and every
//! non-2xx response carries `{"code", "message"}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use nca_core::{
    ConfigPatch, Error as CoreError, Feedback, Seq2SeqParams, Session, SessionConfig, Vocab,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{Checkpoint, Provenance};
use crate::log::LogWriter;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            status: status.as_u16(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::EmptyMessage
            | CoreError::EmptyReply
            | CoreError::SelectionOutOfRange { .. }
            | CoreError::InvalidConfig(_) => Self::bad_request(e.to_string()),
            CoreError::NoPendingTurn => Self::conflict(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (
            status,
            Json(json!({"code": self.code, "message": self.message})),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Milliseconds since the Unix epoch.
pub fn system_clock() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Log file of one session: `chat.jsonl` becomes `chat.<id>.jsonl`.
pub fn session_log_path(base: &FsPath, id: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("session");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{id}.{ext}"),
        None => format!("{stem}.{id}"),
    };
    base.with_file_name(name)
}

struct Model {
    params: Seq2SeqParams,
    vocab: Arc<Vocab>,
    provenance: Provenance,
}

struct Entry {
    session: Session,
    log: Option<LogWriter>,
}

pub struct ServerOptions {
    /// Base name for per-session interaction logs.
    pub log: Option<PathBuf>,
    /// Session settings before any per-session overrides.
    pub defaults: SessionConfig,
    pub clock: Arc<dyn Fn() -> u64 + Send + Sync>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            log: None,
            defaults: SessionConfig::default(),
            clock: Arc::new(system_clock),
        }
    }
}

struct Inner {
    model: RwLock<Option<Arc<Model>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
    opts: ServerOptions,
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(checkpoint: Option<Checkpoint>, opts: ServerOptions) -> Self {
        let state = Self(Arc::new(Inner {
            model: RwLock::new(None),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            opts,
        }));
        if let Some(c) = checkpoint {
            state.set_model(c);
        }
        state
    }

    fn set_model(&self, c: Checkpoint) {
        let model = Model {
            params: c.params,
            vocab: Arc::new(c.vocab),
            provenance: c.provenance,
        };
        *self.0.model.write().unwrap() = Some(Arc::new(model));
    }

    fn model(&self) -> Option<Arc<Model>> {
        self.0.model.read().unwrap().clone()
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.0
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn is_blank(body: &[u8]) -> bool {
    body.iter().all(u8::is_ascii_whitespace)
}

/// Runs `f` on the session under its lock, off the async executor.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Entry) -> ApiResult<T> + Send + 'static,
{
    let entry = state.session(id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = entry
            .lock()
            .map_err(|_| ApiError::internal("session state poisoned"))?;
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let model = state
        .model()
        .ok_or_else(|| ApiError::conflict("no model loaded"))?;
    let patch: ConfigPatch = if is_blank(&body) {
        ConfigPatch::default()
    } else {
        parse_body(&body)?
    };
    let config = patch.apply(&state.0.opts.defaults)?;
    let id = format!("s{}", state.0.next_id.fetch_add(1, AtomicOrdering::Relaxed));
    let log = match &state.0.opts.log {
        Some(base) => Some(
            LogWriter::open(session_log_path(base, &id))
                .map_err(|e| ApiError::internal(e.to_string()))?,
        ),
        None => None,
    };
    let clock = state.0.opts.clock.clone();
    let session = Session::new(
        id.clone(),
        model.params.clone(),
        model.vocab.clone(),
        config,
    )
    .with_clock(Box::new(move || clock()));
    state
        .0
        .sessions
        .write()
        .unwrap()
        .insert(id.clone(), Arc::new(Mutex::new(Entry { session, log })));
    Ok(Json(json!({"sessionId": id, "config": config})))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

async fn message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<nca_core::TurnView>> {
    let entry = state.session(&id)?;
    let body: MessageBody = parse_body(&body)?;
    drop(entry);
    with_session(&state, &id, move |e| {
        let had_pending = e.session.has_pending();
        let view = e.session.user_message(&body.text)?;
        if had_pending {
            // the displaced turn was logged as a skip
            let skipped = &e.session.transcript()[e.session.turns() - 1];
            if let Some(log) = &mut e.log {
                log.append(skipped)
                    .map_err(|err| ApiError::internal(err.to_string()))?;
            }
        }
        Ok(Json(view))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackBody {
    select: Option<usize>,
    text: Option<String>,
    skip: Option<bool>,
}

impl FeedbackBody {
    fn into_feedback(self) -> ApiResult<Feedback> {
        match (self.select, self.text, self.skip) {
            (Some(k), None, None) => Ok(Feedback::Select(k)),
            (None, Some(t), None) => Ok(Feedback::Text(t)),
            (None, None, Some(true)) => Ok(Feedback::Skip),
            _ => Err(ApiError::bad_request(
                "feedback must be exactly one of {\"select\": k}, {\"text\": s} or {\"skip\": true}",
            )),
        }
    }
}

async fn feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<nca_core::UpdateResult>> {
    state.session(&id)?;
    let fb = parse_body::<FeedbackBody>(&body)?.into_feedback()?;
    with_session(&state, &id, move |e| {
        let result = e.session.apply_feedback(fb)?;
        if let (Some(log), Some(record)) = (&mut e.log, e.session.transcript().last()) {
            log.append(record)
                .map_err(|err| ApiError::internal(err.to_string()))?;
        }
        Ok(Json(result))
    })
    .await
}

async fn transcript(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    with_session(&state, &id, |e| {
        serde_json::to_value(e.session.transcript())
            .map(Json)
            .map_err(|err| ApiError::internal(err.to_string()))
    })
    .await
}

async fn update_config(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionConfig>> {
    state.session(&id)?;
    let patch: ConfigPatch = parse_body(&body)?;
    with_session(&state, &id, move |e| {
        Ok(Json(e.session.update_config(&patch)?))
    })
    .await
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum CheckpointAction {
    Save,
    Load,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CheckpointBody {
    action: CheckpointAction,
    path: PathBuf,
    /// Save this session's weights and optimizer instead of the loaded model.
    session_id: Option<String>,
}

async fn checkpoint(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let body: CheckpointBody = parse_body(&body)?;
    let path = body.path.clone();
    match body.action {
        CheckpointAction::Load => {
            if body.session_id.is_some() {
                return Err(ApiError::bad_request("sessionId applies to save only"));
            }
            let ckpt = tokio::task::spawn_blocking(move || Checkpoint::load(&path))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))?
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            let hyper = ckpt.hyper();
            state.set_model(ckpt);
            Ok(Json(
                json!({"status": "loaded", "path": body.path, "hyper": hyper}),
            ))
        }
        CheckpointAction::Save => {
            let ckpt = match &body.session_id {
                Some(id) => {
                    let base = state
                        .model()
                        .map(|m| m.provenance.clone())
                        .unwrap_or_default();
                    with_session(&state, id, move |e| {
                        let s = &e.session;
                        let mut c = Checkpoint::new(s.params().clone(), s.vocab().clone());
                        c.adam = Some(s.adam().clone());
                        c.provenance = base;
                        c.provenance.online_updates +=
                            s.transcript().iter().filter(|r| r.updated()).count();
                        Ok(c)
                    })
                    .await?
                }
                None => {
                    let m = state
                        .model()
                        .ok_or_else(|| ApiError::conflict("no model loaded"))?;
                    let mut c = Checkpoint::new(m.params.clone(), (*m.vocab).clone());
                    c.provenance = m.provenance.clone();
                    c
                }
            };
            tokio::task::spawn_blocking(move || ckpt.save(&path))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))?
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            Ok(Json(json!({"status": "saved", "path": body.path})))
        }
    }
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "bad_request",
        "method not allowed",
    )
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/message", post(message))
        .route("/api/session/{id}/feedback", post(feedback))
        .route("/api/session/{id}/transcript", get(transcript))
        .route("/api/session/{id}/config", patch(update_config))
        .route("/api/checkpoint", post(checkpoint))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
