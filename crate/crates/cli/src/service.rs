//! HTTP API over report sessions and persisted reports.
//!
//! Every handler adapts exactly one autocomplete/report operation. The model
//! db is shared read-only; sessions live in memory and expire after the TTL
//! (expired ids answer 410); finalized reports are written to the reports dir.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use guirepro_core::app_sim::{Action, ActivityId, ComponentId};
use guirepro_core::autocomplete::{AutocompleteError, ReportSession, Suggestion};
use guirepro_core::engine::Target;
use guirepro_core::model_db::{self, ModelDb, SHOTS_DIR};
use guirepro_core::report::{export_json, export_markdown, import_json, BugReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TTL_SECONDS: u64 = 3600;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub db_dir: PathBuf,
    pub bind_address: SocketAddr,
    pub session_ttl: Duration,
    pub reports_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("{0}")]
    NotFound(String),
    #[error("session {0} has expired")]
    Expired(String),
    #[error("{0}")]
    Conflict(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::Malformed(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Expired(_) => StatusCode::GONE,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<AutocompleteError> for ApiError {
    fn from(e: AutocompleteError) -> Self {
        let msg = e.to_string();
        match e {
            AutocompleteError::NotSuggested { .. }
            | AutocompleteError::UnknownVariant { .. }
            | AutocompleteError::UnknownComponent { .. } => ApiError::NotFound(msg),
            AutocompleteError::UnsupportedAction { .. } | AutocompleteError::EmptyTitle => {
                ApiError::Malformed(msg)
            }
            AutocompleteError::EmptySession
            | AutocompleteError::NoSteps
            | AutocompleteError::EmptyModel => ApiError::Conflict(msg),
            AutocompleteError::SessionClosed => ApiError::Expired(msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(m) = &self {
            tracing::error!("{m}");
        }
        (
            self.status(),
            Json(serde_json::json!({ "error": self.to_string() })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Slot {
    session: Arc<Mutex<ReportSession>>,
    last_used: Instant,
}

#[derive(Default)]
struct Sessions {
    live: HashMap<String, Slot>,
    /// Ids of expired or finalized sessions, with the time they were retired.
    retired: HashMap<String, Instant>,
}

impl Sessions {
    fn sweep(&mut self, now: Instant, ttl: Duration) {
        let stale: Vec<String> = self
            .live
            .iter()
            .filter(|(_, s)| now.duration_since(s.last_used) > ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            self.live.remove(&id);
            self.retired.insert(id, now);
        }
        // Tombstones only need to outlive any client still polling.
        let keep = ttl.saturating_mul(10).max(Duration::from_secs(60));
        self.retired.retain(|_, at| now.duration_since(*at) <= keep);
    }
}

pub struct AppState {
    db: Arc<ModelDb>,
    reports_dir: PathBuf,
    ttl: Duration,
    sessions: Mutex<Sessions>,
}

impl AppState {
    pub fn new(db: Arc<ModelDb>, reports_dir: PathBuf, ttl: Duration) -> Self {
        AppState {
            db,
            reports_dir,
            ttl,
            sessions: Mutex::new(Sessions::default()),
        }
    }

    pub fn sweep(&self) {
        lock(&self.sessions).sweep(Instant::now(), self.ttl);
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<ReportSession>>> {
        let mut sessions = lock(&self.sessions);
        let now = Instant::now();
        sessions.sweep(now, self.ttl);
        if let Some(slot) = sessions.live.get_mut(id) {
            slot.last_used = now;
            return Ok(slot.session.clone());
        }
        if sessions.retired.contains_key(id) {
            return Err(ApiError::Expired(id.to_owned()));
        }
        Err(ApiError::NotFound(format!("unknown session {id}")))
    }

    fn retire(&self, id: &str) {
        let mut sessions = lock(&self.sessions);
        sessions.live.remove(id);
        sessions.retired.insert(id.to_owned(), Instant::now());
    }

    /// Runs `f` with the session locked, so operations on one session are
    /// serialized while distinct sessions proceed independently.
    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut ReportSession) -> ApiResult<T>,
    ) -> ApiResult<T> {
        let session = self.session(id)?;
        let mut guard = lock(&session);
        f(&mut guard)
    }

    fn report_path(&self, id: &str) -> ApiResult<PathBuf> {
        let valid = !id.is_empty()
            && id.len() <= 64
            && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-');
        if !valid {
            return Err(ApiError::NotFound(format!("unknown report {id}")));
        }
        Ok(self.reports_dir.join(format!("{id}.json")))
    }

    fn load_report(&self, id: &str) -> ApiResult<BugReport> {
        let path = self.report_path(id)?;
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ApiError::NotFound(format!("unknown report {id}")))
            }
            Err(e) => return Err(ApiError::Internal(format!("{}: {e}", path.display()))),
        };
        import_json(&bytes).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Bodies are parsed by hand so every malformed payload maps to 400.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/app", get(app_info))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}/suggestions", get(suggestions))
        .route("/sessions/{id}/steps", post(confirm_step))
        .route("/sessions/{id}/fallback-steps", post(fallback_step))
        .route("/sessions/{id}/steps/last", delete(undo_step))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/reports/{id}", get(get_report))
        .route("/reports/{id}/markdown", get(get_report_markdown))
        .route("/screenshots/{name}", get(screenshot))
        .with_state(state)
}

#[derive(Serialize)]
struct AppInfo {
    app_id: String,
    version: String,
    states: usize,
    edges: usize,
}

async fn app_info(State(st): State<Arc<AppState>>) -> Json<AppInfo> {
    Json(AppInfo {
        app_id: st.db.meta.app_id.clone(),
        version: st.db.meta.version.clone(),
        states: st.db.graph.states.len(),
        edges: st.db.graph.edges.len(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenRequest {
    assume_launch: bool,
}

async fn open_session(
    State(st): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: OpenRequest = parse_body(&body)?;
    let session = ReportSession::open(st.db.clone(), req.assume_launch)?;
    let id = session.session_id().to_owned();
    lock(&st.sessions).live.insert(
        id.clone(),
        Slot {
            session: Arc::new(Mutex::new(session)),
            last_used: Instant::now(),
        },
    );
    tracing::debug!(session = %id, "session opened");
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({ "session_id": id })),
    ))
}

/// URL under which a db screenshot reference is served.
pub fn screenshot_url(reference: &str) -> String {
    let name = reference
        .strip_prefix(&format!("{SHOTS_DIR}/"))
        .unwrap_or(reference);
    format!("/screenshots/{name}")
}

#[derive(Serialize)]
struct VariantView {
    source_state: String,
    target: Target,
    screenshot: String,
}

#[derive(Serialize)]
struct SuggestionView {
    component: ComponentId,
    activity: ActivityId,
    action: Action,
    variants: Vec<VariantView>,
}

impl From<Suggestion> for SuggestionView {
    fn from(s: Suggestion) -> Self {
        SuggestionView {
            component: s.component,
            activity: s.activity,
            action: s.action,
            variants: s
                .variants
                .into_iter()
                .map(|v| VariantView {
                    source_state: v.source_state.short_id,
                    target: v.target,
                    screenshot: screenshot_url(&v.contextual_screenshot),
                })
                .collect(),
        }
    }
}

async fn suggestions(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<SuggestionView>>> {
    st.with_session(&id, |s| {
        if s.is_closed() {
            return Err(AutocompleteError::SessionClosed.into());
        }
        Ok(Json(
            s.suggestions()
                .into_iter()
                .map(SuggestionView::from)
                .collect(),
        ))
    })
}

#[derive(Serialize)]
struct SessionStatus {
    estimate_size: usize,
    degraded: bool,
    steps: usize,
}

impl SessionStatus {
    fn of(s: &ReportSession) -> Json<Self> {
        Json(SessionStatus {
            estimate_size: s.estimate().len(),
            degraded: s.degraded(),
            steps: s.steps().len(),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfirmRequest {
    component: String,
    action: Action,
    source_state: String,
}

async fn confirm_step(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<SessionStatus>> {
    let req: ConfirmRequest = parse_body(&body)?;
    st.with_session(&id, |s| {
        s.confirm_step(&req.component, req.action, &req.source_state)?;
        Ok(SessionStatus::of(s))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FallbackRequest {
    activity: String,
    component: String,
    action: Action,
}

async fn fallback_step(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<SessionStatus>> {
    let req: FallbackRequest = parse_body(&body)?;
    st.with_session(&id, |s| {
        s.fallback_step(&req.activity, &req.component, req.action)?;
        Ok(SessionStatus::of(s))
    })
}

async fn undo_step(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<SessionStatus>> {
    st.with_session(&id, |s| {
        s.undo_step()?;
        Ok(SessionStatus::of(s))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalizeRequest {
    title: String,
    #[serde(default)]
    description: String,
}

async fn finalize(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: FinalizeRequest = parse_body(&body)?;
    let report = st.with_session(&id, |s| {
        // Validate before closing the session so a failed write can be retried.
        let mut trial = s.clone();
        let report = trial.finalize(&req.title, &req.description)?;
        write_report(&st.reports_dir, &report).map_err(|e| ApiError::Internal(format!("{e:#}")))?;
        *s = trial;
        Ok(report)
    })?;
    st.retire(&id);
    tracing::info!(report = %report.report_id, "report finalized");
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({ "report_id": report.report_id })),
    ))
}

/// Writes `<reports_dir>/<report_id>.json` via a temp file and rename.
pub fn write_report(reports_dir: &Path, report: &BugReport) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(reports_dir)
        .with_context(|| format!("creating {}", reports_dir.display()))?;
    let path = reports_dir.join(format!("{}.json", report.report_id));
    let tmp = reports_dir.join(format!(".{}.json.tmp", report.report_id));
    std::fs::write(&tmp, export_json(report))
        .with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(path)
}

async fn get_report(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let report = st.load_report(&id)?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        export_json(&report),
    )
        .into_response())
}

async fn get_report_markdown(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let report = st.load_report(&id)?;
    Ok((
        [(header::CONTENT_TYPE, "text/markdown; charset=utf-8")],
        export_markdown(&report),
    )
        .into_response())
}

async fn screenshot(
    State(st): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
) -> ApiResult<Response> {
    let reference = format!("{SHOTS_DIR}/{name}");
    let Some(path) = st.db.screenshot_path(&reference) else {
        return Err(ApiError::NotFound(format!("unknown screenshot {name}")));
    };
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, "image/x-portable-pixmap")], bytes).into_response())
}

/// Loads the db and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let db = model_db::load(&config.db_dir)
        .with_context(|| format!("loading db {}", config.db_dir.display()))?;
    let state = Arc::new(AppState::new(
        Arc::new(db),
        config.reports_dir.clone(),
        config.session_ttl,
    ));
    let listener = tokio::net::TcpListener::bind(config.bind_address)
        .await
        .with_context(|| format!("binding {}", config.bind_address))?;
    tracing::info!(addr = %listener.local_addr()?, "serving");

    let sweeper = state.clone();
    let period = config
        .session_ttl
        .clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });

    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
