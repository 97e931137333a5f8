//! HTTP+JSON session service.
//!
//! Endpoints (all JSON unless noted):
//!
//! | method | path | purpose |
//! |---|---|---|
//! | POST | `/v1/sessions` | create a session |
//! | GET | `/v1/sessions/{id}` | session handle |
//! | GET | `/v1/sessions/{id}/observation` | current prompt bundle |
//! | POST | `/v1/sessions/{id}/action` | submit one raw reply |
//! | GET | `/v1/sessions/{id}/log` | episode log (JSON lines) |
//! | GET | `/v1/datasets` | loaded datasets and their episodes |
//! | GET | `/v1/assets/{hash}.png` | rendered observation image |
//!
//! Handlers are thin wrappers that run the blocking [`AppState`] operations
//! on tokio's blocking pool. Each session sits behind its own lock, so
//! requests to one session are serialized while different sessions proceed
//! in parallel.

mod error;
mod state;

use std::net::SocketAddr;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};

pub use error::{ApiError, ServiceError};
pub use state::{
    ActionResult, AppState, CreateSession, DatasetView, EpisodeSummary, ImageRef, ObservationView, ServiceConfig,
    SessionHandle, SubmitAction, DEFAULT_IDLE_TIMEOUT,
};

pub const API_VERSION: &str = "v1";

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

async fn create_session(
    State(app): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionHandle>), ApiError> {
    let handle = blocking(move || app.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn session_handle(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionHandle>, ApiError> {
    blocking(move || app.session_handle(&id)).await.map(Json)
}

async fn observation(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<ObservationView>, ApiError> {
    blocking(move || app.observation(&id)).await.map(Json)
}

async fn submit_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SubmitAction>,
) -> Result<Json<ActionResult>, ApiError> {
    blocking(move || app.submit_action(&id, &req.raw_text)).await.map(Json)
}

async fn session_log(State(app): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let text = blocking(move || app.log_text(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text))
}

async fn datasets(State(app): State<AppState>) -> Json<Vec<DatasetView>> {
    Json(app.datasets())
}

async fn asset(State(app): State<AppState>, Path(file): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let hash = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::NotFound(format!("asset `{file}`")))?
        .to_string();
    let bytes = blocking(move || app.asset(&hash)).await?;
    Ok((
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")],
        bytes,
    ))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_handle))
        .route("/v1/sessions/{id}/observation", get(observation))
        .route("/v1/sessions/{id}/action", post(submit_action))
        .route("/v1/sessions/{id}/log", get(session_log))
        .route("/v1/datasets", get(datasets))
        .route("/v1/assets/{file}", get(asset))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends, expiring idle sessions in the background.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let sweeper = state.clone();
    let period = (state.config().idle_timeout / 4).max(std::time::Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.evict_idle(std::time::Instant::now());
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
