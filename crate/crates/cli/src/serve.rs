use std::io::Write;
use std::net::SocketAddr;
use std::sync::Arc;

use kennel_core::Provider;
use kennel_service::{AppState, ServiceConfig};

use crate::error::{CliError, CliResult};

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

/// Binds, prints `listening on http://{addr}` and serves until SIGINT or
/// SIGTERM.
pub fn run(
    config: ServiceConfig,
    provider: Arc<dyn Provider>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let listen: SocketAddr = config.listen;
    let state = AppState::with_provider(config, provider)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::config(format!("starting runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| CliError::config(format!("cannot bind {listen}: {e}")))?;
        let addr = listener.local_addr()?;
        writeln!(out, "listening on http://{addr}")?;
        out.flush()?;
        kennel_service::serve(listener, state, shutdown_signal())
            .await
            .map_err(|e| CliError::config(format!("server error: {e}")))
    })
}
