//! HTTP/JSON surface of the collection service.
//!
//! | method | path                           | body / answer                        |
//! |--------|--------------------------------|--------------------------------------|
//! | GET    | `/api/health`                  | `{"status":"ok"}`                    |
//! | POST   | `/api/session`                 | capability report → session record   |
//! | GET    | `/api/session/{id}/playlist`   | playlist with video metadata         |
//! | GET    | `/api/video/{id}`              | the asset file, range requests ok    |
//! | POST   | `/api/session/{id}/trace`      | trace upload → ack                   |
//! | POST   | `/api/session/{id}/complete`   | → `{"completion_code": ...}`         |
//! | GET    | `/api/export`                  | admin token → dataset archive        |
//!
//! Errors are `{"code", "message", "detail"}` with a matching status.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mousesal_core::FoveationParams;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tower::ServiceExt;
use tower_http::services::ServeFile;

use crate::catalog::load_catalog;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::service::{Capability, CollectionService, SessionStatus, Settings, TraceUpload};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<CollectionService>,
    pub asset_dir: PathBuf,
    pub admin_token: Option<String>,
    pub webhook_url: Option<String>,
    pub foveation: FoveationParams,
    client: reqwest::Client,
}

impl AppState {
    pub fn new(service: Arc<CollectionService>, config: &ServiceConfig) -> Self {
        AppState {
            service,
            asset_dir: config.asset_dir.clone(),
            admin_token: config.admin_token.clone(),
            webhook_url: config.webhook_url.clone(),
            foveation: FoveationParams::default(),
            client: reqwest::Client::new(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Excluded { .. } => StatusCode::FORBIDDEN,
            ServiceError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Precondition { .. } => StatusCode::CONFLICT,
            ServiceError::Parameter(_) => StatusCode::BAD_REQUEST,
            ServiceError::State(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Config(_) | ServiceError::Storage(_) | ServiceError::CorruptLog { .. } => {
                tracing::error!("{self}");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let body = json!({ "code": self.code(), "message": self.to_string(), "detail": self.detail() });
        (status, Json(body)).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| {
        ServiceError::Validation { message: "malformed JSON body".into(), detail: json!({ "reason": e.body_text() }) }
    })
}

/// Opens everything `serve` needs; fails before any port is bound.
pub fn prepare(config: &ServiceConfig) -> Result<AppState, ServiceError> {
    config.validate()?;
    let meta = std::fs::metadata(&config.asset_dir).map_err(|e| {
        ServiceError::Config(format!("asset directory {} is not readable: {e}", config.asset_dir.display()))
    })?;
    if !meta.is_dir() {
        return Err(ServiceError::Config(format!("{} is not a directory", config.asset_dir.display())));
    }
    std::fs::read_dir(&config.asset_dir)
        .map_err(|e| ServiceError::Config(format!("cannot list {}: {e}", config.asset_dir.display())))?;
    let catalog = load_catalog(&config.catalog_path())?;
    for entry in &catalog {
        let path = config.asset_dir.join(&entry.asset_path);
        if !path.is_file() {
            return Err(ServiceError::Config(format!(
                "asset of `{}` missing: {}",
                entry.video_id,
                path.display()
            )));
        }
    }
    let service = CollectionService::open(catalog, &config.data_dir, Settings::from(config))?;
    Ok(AppState::new(Arc::new(service), config))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/playlist", get(playlist))
        .route("/api/session/{id}/trace", post(upload_trace))
        .route("/api/session/{id}/complete", post(complete))
        .route("/api/video/{id}", get(video))
        .route("/api/export", get(export))
        .with_state(state)
}

/// Binds `config.listen`, serves until `shutdown` resolves, then compacts
/// and flushes the log.
pub async fn serve(
    state: AppState,
    listen: &str,
    shutdown: impl Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    let listener = TcpListener::bind(listen)
        .await
        .map_err(|e| ServiceError::Config(format!("cannot listen on {listen}: {e}")))?;
    on_bound(listener.local_addr()?);
    let service = state.service.clone();
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    service.shutdown()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<Capability>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let capability = body(payload)?;
    let session = state.service.create_session(capability)?;
    if session.status == SessionStatus::Excluded {
        tracing::info!(session = %session.session_id, reason = ?session.exclusion_reason, "session excluded");
    }
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlaylistItem {
    pub video_id: String,
    pub url: String,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub duration_ms: u64,
    pub completed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlaylistResponse {
    pub session_id: String,
    pub status: SessionStatus,
    pub playlist: Vec<PlaylistItem>,
    pub foveation: FoveationParams,
}

async fn playlist(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<PlaylistResponse>, ServiceError> {
    let session = state.service.session(&id)?;
    let playlist = session
        .playlist
        .iter()
        .map(|v| {
            let e = state.service.video(v)?;
            Ok(PlaylistItem {
                url: format!("/api/video/{}", e.video_id),
                completed: session.completed_videos.contains(v),
                video_id: e.video_id,
                width: e.width,
                height: e.height,
                fps: e.fps,
                duration_ms: e.duration_ms,
            })
        })
        .collect::<Result<_, ServiceError>>()?;
    Ok(Json(PlaylistResponse { session_id: id, status: session.status, playlist, foveation: state.foveation }))
}

async fn upload_trace(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<TraceUpload>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let upload = body(payload)?;
    let service = state.service.clone();
    let ack = tokio::task::spawn_blocking(move || service.ingest_trace(&id, upload))
        .await
        .map_err(|e| ServiceError::State(format!("ingest task failed: {e}")))??;
    Ok(Json(ack).into_response())
}

async fn complete(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let (code, newly) = state.service.complete_session(&id)?;
    if newly {
        if let Some(url) = state.webhook_url.clone() {
            let client = state.client.clone();
            let payload = json!({ "session_id": id, "completion_code": code });
            tokio::spawn(async move {
                match client.post(&url).json(&payload).send().await {
                    Ok(r) => tracing::info!(status = %r.status(), "completion webhook delivered"),
                    Err(e) => tracing::warn!("completion webhook failed: {e}"),
                }
            });
        }
    }
    Ok(Json(json!({ "completion_code": code })).into_response())
}

async fn video(State(state): State<AppState>, Path(id): Path<String>, req: Request) -> Result<Response, ServiceError> {
    let entry = state.service.video(&id)?;
    let path = state.asset_dir.join(&entry.asset_path);
    let res = match ServeFile::new(path).oneshot(req).await {
        Ok(res) => res,
        Err(never) => match never {},
    };
    Ok(res.map(Body::new))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    include_excluded: bool,
}

async fn export(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ServiceError> {
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match (&state.admin_token, presented) {
        (Some(expected), Some(given)) if expected == given => {}
        _ => return Err(ServiceError::Unauthorized),
    }
    Ok(Json(state.service.export_dataset(q.include_excluded)).into_response())
}
