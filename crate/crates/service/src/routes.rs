use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use kennel_core::rag::KnowledgeSourceConfig;
use kennel_core::{BarkError, ErrorKind, Message, PromptParameters};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::presets::PRESETS;
use crate::state::AppState;

/// Uniform `{error, kind}` error body.
#[derive(Debug)]
pub enum ApiError {
    Bark(BarkError),
    Internal(String),
}

impl From<BarkError> for ApiError {
    fn from(err: BarkError) -> Self {
        ApiError::Bark(err)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Bark(e) => match e.kind() {
                ErrorKind::InvalidInput => StatusCode::BAD_REQUEST,
                ErrorKind::Provider | ErrorKind::Network => StatusCode::BAD_GATEWAY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match &self {
            ApiError::Bark(e) => json!({"error": e.to_string(), "kind": e.kind().as_str()}),
            ApiError::Internal(m) => json!({"error": m, "kind": "internal"}),
        };
        if status.is_server_error() {
            tracing::error!(%status, error = %body["error"], "request failed");
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn blocking<T, F>(state: &Arc<AppState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> kennel_core::Result<T> + Send + 'static,
{
    let st = state.clone();
    let out = tokio::task::spawn_blocking(move || f(&st))
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?;
    out.map_err(|e| ApiError::Bark(state.redact(e)))
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::Bark(BarkError::invalid(format!("request body: {e}"))))
}

#[derive(Deserialize)]
struct ChatRequest {
    prompt: String,
    #[serde(default)]
    params: Option<PromptParameters>,
}

#[derive(Serialize)]
struct HistoryReply {
    messages: Vec<Message>,
}

#[derive(Deserialize)]
struct DocumentRequest {
    doc_id: String,
    text: String,
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: ChatRequest = parse_body(&body)?;
    let reply = blocking(&state, move |s| s.chat(&id, &req.prompt, req.params)).await?;
    Ok(Json(reply).into_response())
}

async fn get_history(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let messages = blocking(&state, move |s| s.history(&id)).await?;
    Ok(Json(HistoryReply { messages }).into_response())
}

async fn get_source(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let cfg = blocking(&state, |s| Ok(s.source())).await?;
    Ok(Json(cfg).into_response())
}

async fn put_source(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let cfg: KnowledgeSourceConfig = parse_body(&body)?;
    let shown = blocking(&state, move |s| s.set_source(cfg)).await?;
    Ok(Json(shown).into_response())
}

async fn post_document(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: DocumentRequest = parse_body(&body)?;
    let reply = blocking(&state, move |s| s.ingest(&req.doc_id, &req.text)).await?;
    Ok(Json(reply).into_response())
}

async fn delete_document(
    State(state): State<Arc<AppState>>,
    Path(doc_id): Path<String>,
) -> ApiResult<StatusCode> {
    blocking(&state, move |s| s.delete_document(&doc_id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn presets() -> Json<serde_json::Value> {
    Json(json!({"presets": PRESETS}))
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE]);
    match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => layer.allow_origin(origin),
        None => layer.allow_origin(Any),
    }
}

/// The full HTTP surface. Static files, when configured, are the fallback.
pub fn router(state: Arc<AppState>) -> Router {
    let config = state.config();
    let cors = cors(config.cors_origin.as_deref());
    let static_dir = config.static_dir.clone();
    let api = Router::new()
        .route("/health", get(health))
        .route("/api/presets", get(presets))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/history", get(get_history))
        .route("/api/knowledge-source", get(get_source).put(put_source))
        .route("/api/documents", post(post_document))
        .route("/api/documents/{doc_id}", delete(delete_document))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}
