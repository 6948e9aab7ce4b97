//! Local HTTP interface to a running grading session.
//!
//! Reads are served from the latest snapshot. Each `POST /api/action` becomes
//! one [`Action`] applied to the shared [`Session`]; a second action arriving
//! while one is being processed gets `409 Conflict`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tokio::sync::watch;

use crate::engine::{Action, Effect, MediaKind, Session, SessionSnapshot};
use crate::error::Error;
use crate::points::format_points;
use crate::terminal::HookRunner;
use crate::workspace::FinalizeReport;

/// Largest submission returned inline by `/api/submission/current`.
pub const TEXT_LIMIT: u64 = 2 * 1024 * 1024;

const PLACEHOLDER: &str = "<!doctype html>\n<title>gradekit</title>\n<p>The grading API is running under <code>/api/</code>. \
Start the server with <code>--static-dir</code> to serve a grading console here.</p>\n";

struct Shared {
    session: Mutex<Session>,
    snapshot: RwLock<Arc<SessionSnapshot>>,
    hooks: HookRunner,
    report: Mutex<Option<FinalizeReport>>,
    finished: watch::Sender<bool>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// Wrap a started session. `initial` are the effects returned by
    /// [`Session::start`]; they are performed immediately.
    pub fn new(session: Session, initial: Vec<Effect>, hooks: HookRunner) -> Result<AppState, Error> {
        let snapshot = Arc::new(session.snapshot());
        let (finished, _) = watch::channel(false);
        let state = AppState(Arc::new(Shared {
            session: Mutex::new(session),
            snapshot: RwLock::new(snapshot),
            hooks,
            report: Mutex::new(None),
            finished,
        }));
        {
            let session = state.0.session.lock().unwrap_or_else(|p| p.into_inner());
            state.perform(&session, initial)?;
        }
        Ok(state)
    }

    pub fn snapshot(&self) -> Arc<SessionSnapshot> {
        self.0.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Set once the session has finalized its outputs.
    pub fn report(&self) -> Option<FinalizeReport> {
        self.0.report.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Resolves after the session finishes.
    pub fn finished(&self) -> watch::Receiver<bool> {
        self.0.finished.subscribe()
    }

    fn perform(&self, session: &Session, effects: Vec<Effect>) -> Result<(), Error> {
        let mut notices = Vec::new();
        for effect in effects {
            if effect == Effect::Finalize {
                let report = session.finalize()?;
                *self.0.report.lock().unwrap_or_else(|p| p.into_inner()) = Some(report);
                self.0.finished.send_replace(true);
            } else {
                self.0.hooks.run(&effect, &mut notices);
            }
        }
        if !notices.is_empty() {
            eprint!("{}", String::from_utf8_lossy(&notices));
        }
        Ok(())
    }

    /// Apply one action; used by the HTTP handler and by shutdown.
    pub fn dispatch(&self, action: Action) -> Result<Arc<SessionSnapshot>, ApiError> {
        let mut session = match self.0.session.try_lock() {
            Ok(s) => s,
            Err(TryLockError::WouldBlock) => return Err(ApiError::Busy),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        let effects = session.apply(action).map_err(ApiError::from)?;
        let snapshot = Arc::new(session.snapshot());
        *self.0.snapshot.write().unwrap_or_else(|p| p.into_inner()) = snapshot.clone();
        self.perform(&session, effects).map_err(ApiError::from)?;
        Ok(snapshot)
    }

    fn with_session<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        let session = self.0.session.lock().unwrap_or_else(|p| p.into_inner());
        f(&session)
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Busy,
    Finished,
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(_)
            | Error::Validation(_)
            | Error::UnknownQuestion(_)
            | Error::UnknownCode { .. } => ApiError::BadRequest(e.to_string()),
            Error::SessionFinished | Error::AllGraded => ApiError::Finished,
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Busy => (
                StatusCode::CONFLICT,
                "another action is being processed".to_string(),
            ),
            ApiError::Finished => (StatusCode::CONFLICT, "grading session has ended".to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

async fn get_session(State(state): State<AppState>) -> Json<Arc<SessionSnapshot>> {
    Json(state.snapshot())
}

async fn get_progress(State(state): State<AppState>) -> Response {
    let snap = state.snapshot();
    Json(json!({
        "graded": snap.progress.graded,
        "total": snap.progress.total,
        "remaining_in_scope": snap.progress.remaining_in_scope,
        "finished": snap.finished,
    }))
    .into_response()
}

#[derive(Serialize)]
struct RubricItemJson {
    name: String,
    total_points: Option<String>,
    prompt_code: String,
    prompt_message: String,
    feedback: String,
    points: String,
}

async fn get_rubric(State(state): State<AppState>) -> Response {
    state.with_session(|s| {
        let rubric = s.rubric();
        let items: Vec<RubricItemJson> = rubric
            .items()
            .iter()
            .map(|i| RubricItemJson {
                name: i.applicability.as_name().to_string(),
                total_points: i.total_points.map(format_points),
                prompt_code: i.prompt_code.clone(),
                prompt_message: i.prompt_message.clone(),
                feedback: i.feedback.clone(),
                points: i.signed_points(rubric.mode()),
            })
            .collect();
        Json(json!({
            "mode": rubric.mode(),
            "questions": rubric.questions(),
            "items": items,
        }))
        .into_response()
    })
}

fn current_submission(state: &AppState) -> Option<(PathBuf, MediaKind, String)> {
    let snap = state.snapshot();
    let sub = snap.submission.as_ref()?;
    let path = state.with_session(|s| {
        snap.current
            .as_ref()
            .and_then(|c| s.workspace().submission_path(&c.gradee))
    })?;
    Some((path, sub.media_kind, sub.path.clone()))
}

async fn get_submission(State(state): State<AppState>) -> Response {
    let Some((path, kind, rel)) = current_submission(&state) else {
        return (StatusCode::NOT_FOUND, Json(json!({ "error": "no current submission" })))
            .into_response();
    };
    let size = std::fs::metadata(&path).map(|m| m.len()).ok();
    let mut body = json!({ "path": rel, "media_kind": kind, "size": size });
    match kind {
        MediaKind::Text | MediaKind::Markdown if size.is_some_and(|n| n <= TEXT_LIMIT) => {
            match std::fs::read_to_string(&path) {
                Ok(text) => body["text"] = json!(text),
                Err(_) => body["download"] = json!("/api/submission/current/raw"),
            }
        }
        MediaKind::Directory => {
            let mut entries: Vec<String> = std::fs::read_dir(&path)
                .map(|rd| {
                    rd.filter_map(|e| e.ok())
                        .map(|e| e.file_name().to_string_lossy().into_owned())
                        .collect()
                })
                .unwrap_or_default();
            entries.sort();
            body["entries"] = json!(entries);
        }
        MediaKind::Missing => {}
        _ => body["download"] = json!("/api/submission/current/raw"),
    }
    Json(body).into_response()
}

async fn get_submission_raw(State(state): State<AppState>) -> Response {
    let Some((path, _, _)) = current_submission(&state) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().replace('"', ""))
                .unwrap_or_default();
            (
                [
                    (header::CONTENT_TYPE, "application/octet-stream".to_string()),
                    (
                        header::CONTENT_DISPOSITION,
                        format!("attachment; filename=\"{name}\""),
                    ),
                ],
                Body::from(bytes),
            )
                .into_response()
        }
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn get_preview(State(state): State<AppState>) -> Response {
    let rendered = state.with_session(|s| s.workspace().render(s.log()));
    match rendered {
        Ok(r) => Json(json!({
            "header": r.grade_sheet.header(),
            "rows": r.grade_sheet.records(),
            "csv": r.grade_sheet.to_csv(),
        }))
        .into_response(),
        Err(e) => ApiError::Internal(e.to_string()).into_response(),
    }
}

async fn post_action(State(state): State<AppState>, body: Bytes) -> Response {
    let action: Action = match serde_json::from_slice(&body) {
        Ok(a) => a,
        Err(e) => return ApiError::BadRequest(format!("invalid action: {e}")).into_response(),
    };
    let result = tokio::task::spawn_blocking(move || state.dispatch(action)).await;
    match result {
        Ok(Ok(snap)) => Json(snap).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ApiError::Internal(e.to_string()).into_response(),
    }
}

/// All routes. Static files come from `static_dir` when given.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(get_session))
        .route("/api/rubric", get(get_rubric))
        .route("/api/progress", get(get_progress))
        .route("/api/submission/current", get(get_submission))
        .route("/api/submission/current/raw", get(get_submission_raw))
        .route("/api/gradesheet/preview", get(get_preview))
        .route("/api/action", post(post_action))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

/// Serve until the session finishes or the process is interrupted. An
/// interrupt quits the session so its outputs are still written.
pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    allow_remote: bool,
    static_dir: Option<PathBuf>,
) -> Result<(), Error> {
    if !addr.ip().is_loopback() && !allow_remote {
        return Err(Error::Input(crate::error::InputError::Invalid(format!(
            "refusing to listen on non-loopback address {addr} without --allow-remote"
        ))));
    }
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    let local = listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?;
    eprintln!("Serving grading session on http://{local}/");
    let mut finished = state.finished();
    let on_interrupt = state.clone();
    let shutdown = async move {
        tokio::select! {
            _ = async { finished.wait_for(|f| *f).await.map(|_| ()) } => {}
            _ = tokio::signal::ctrl_c() => {
                let _ = tokio::task::spawn_blocking(move || on_interrupt.dispatch(Action::Quit)).await;
            }
        }
    };
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| Error::io(local.to_string(), e))
}
