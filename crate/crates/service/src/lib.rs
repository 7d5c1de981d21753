//! HTTP facade over `kennel-core`: chat turns, session history, the active
//! knowledge source and document ingestion into a live keyword corpus.
//!
//! | Method | Path | Body / reply |
//! |---|---|---|
//! | POST | `/api/sessions/{id}/messages` | `{prompt, params?}` → `{text, finish_reason, usage?, chunks_used}` |
//! | GET | `/api/sessions/{id}/history` | `{messages: [{role, content, created_at}]}` |
//! | GET/PUT | `/api/knowledge-source` | `{kind, top_k?, template?, settings}` (keys redacted on output) |
//! | POST | `/api/documents` | `{doc_id, text}` → `{doc_id, chunks, replaced}` |
//! | DELETE | `/api/documents/{doc_id}` | 204 |
//! | GET | `/health`, `/api/presets` | |
//!
//! Errors are `{error, kind}` with 400 for invalid input, 502 for provider
//! and network failures and 500 otherwise.

pub mod presets;
mod routes;
mod state;

use std::future::Future;
use std::sync::Arc;

pub use routes::{router, ApiError};
pub use state::{AppState, ChatReply, ChunkUsed, IngestReply, ServiceConfig, DEFAULT_LISTEN};

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
