//! HTTP/JSON service over a loaded [`Engine`].

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::task::JoinHandle;
use tower_http::services::{ServeDir, ServeFile};

use scout_core::api::{AttributeSearchResponse, ErrorBody, HealthResponse, SearchRequest};
use scout_core::engine::{Engine, EngineError};

/// JSON schema describing every response body.
pub const API_SCHEMA: &str = include_str!("../schema/api.schema.json");

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    background: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        Self { engine, background: Arc::new(Mutex::new(Vec::new())) }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    fn spawn(&self, fut: impl std::future::Future<Output = ()> + Send + 'static) {
        let mut tasks = self.background.lock().unwrap();
        tasks.retain(|t| !t.is_finished());
        tasks.push(tokio::spawn(fut));
    }

    /// Waits for eager relevance generation started by earlier searches.
    pub async fn drain_background(&self) {
        loop {
            let tasks: Vec<JoinHandle<()>> = std::mem::take(&mut *self.background.lock().unwrap());
            if tasks.is_empty() {
                return;
            }
            for t in tasks {
                let _ = t.await;
            }
        }
    }
}

pub struct ApiError(StatusCode, String);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::BadRequest(_) => StatusCode::BAD_REQUEST,
            EngineError::NotFound(_) => StatusCode::NOT_FOUND,
            EngineError::Unavailable(_) | EngineError::Gateway(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

#[derive(Deserialize)]
struct SearchParams {
    #[serde(default)]
    defer_suggestions: bool,
}

#[derive(Deserialize)]
struct DigestParam {
    digest: Option<String>,
}

#[derive(Deserialize)]
struct AttributeParams {
    q: Option<String>,
    k: Option<usize>,
}

async fn health(State(s): State<AppState>) -> Json<HealthResponse> {
    let catalog = s.engine.catalog();
    Json(HealthResponse {
        status: "ok".into(),
        datasets: catalog.len(),
        semantic_datasets: catalog.semantic().count(),
        provider: s.engine.gateway().describe(),
    })
}

async fn search(
    State(s): State<AppState>,
    Query(params): Query<SearchParams>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: SearchRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid search request: {e}")))?;
    let outcome = s.engine.search(&request, params.defer_suggestions).await?;
    let response = outcome.response;
    if !outcome.eager_relevance.is_empty() {
        let engine = s.engine.clone();
        let digest = response.state_digest.clone();
        let ids = outcome.eager_relevance;
        s.spawn(async move { engine.prefetch_relevance(&digest, &ids).await });
    }
    let status = if response.semantic_unavailable { StatusCode::SERVICE_UNAVAILABLE } else { StatusCode::OK };
    Ok((status, Json(response)).into_response())
}

fn required_digest(p: DigestParam) -> Result<String, ApiError> {
    p.digest.filter(|d| !d.trim().is_empty()).ok_or_else(|| bad_request("missing digest parameter"))
}

async fn suggestions(State(s): State<AppState>, Query(p): Query<DigestParam>) -> Result<Response, ApiError> {
    let digest = required_digest(p)?;
    Ok(Json(s.engine.suggestions(&digest).await?).into_response())
}

async fn dataset(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(p): Query<DigestParam>,
) -> Result<Response, ApiError> {
    Ok(Json(s.engine.dataset_detail(&id, p.digest.as_deref())?).into_response())
}

async fn relevance(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(p): Query<DigestParam>,
) -> Result<Response, ApiError> {
    let digest = required_digest(p)?;
    Ok(Json(s.engine.relevance(&digest, &id).await?).into_response())
}

async fn attributes(State(s): State<AppState>, Query(p): Query<AttributeParams>) -> Result<Response, ApiError> {
    let q = p.q.unwrap_or_default();
    if q.trim().is_empty() {
        return Err(bad_request("missing q parameter"));
    }
    if p.k == Some(0) {
        return Err(bad_request("k must be at least 1"));
    }
    let dataset_ids = s.engine.attribute_datasets(&q, p.k).await?;
    Ok(Json(AttributeSearchResponse { query: q, dataset_ids }).into_response())
}

async fn unknown_api() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "no such endpoint".into())
}

async fn schema() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/schema+json")], API_SCHEMA)
}

/// API routes, plus the UI bundle from `static_dir` when given. Unknown
/// non-API paths fall back to `index.html` for client-side routing.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/schema", get(schema))
        .route("/api/search", post(search))
        .route("/api/suggestions", get(suggestions))
        .route("/api/datasets/{id}", get(dataset))
        .route("/api/datasets/{id}/relevance", get(relevance))
        .route("/api/attributes/search", get(attributes))
        .route("/api/{*rest}", get(unknown_api).post(unknown_api))
        .with_state(state);
    match static_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api,
    }
}

/// Serves until `shutdown` resolves, then persists generated indicators.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    static_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let engine = state.engine.clone();
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state.clone(), static_dir)).with_graceful_shutdown(shutdown).await?;
    state.drain_background().await;
    engine.persist()
}
