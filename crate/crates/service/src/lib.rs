//! HTTP service for live assistance sessions, benchmark jobs and reports.
//!
//! [`router`] builds the axum application over an [`AppState`]; [`serve`]
//! binds it and runs until interrupted. [`client`] is a blocking client for
//! the same API, including a simulated user that drives a session remotely.

pub mod client;
pub mod error;
pub mod routes;
pub mod state;

use egoassist_core::config::RunConfig;
use egoassist_core::jobs::JobError;
use thiserror::Error;

pub use error::{ApiError, ErrorBody};
pub use routes::router;
pub use state::AppState;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Setup(#[from] JobError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Serve(std::io::Error),
}

/// Serves the API on the configured address until Ctrl-C.
pub async fn serve(config: RunConfig) -> Result<(), ServiceError> {
    let addr = config.service.bind.clone();
    let state = tokio::task::spawn_blocking(move || AppState::new(config))
        .await
        .map_err(|e| ServiceError::Serve(std::io::Error::other(e)))??;
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: addr.clone(),
            source,
        })?;
    tracing::info!(%addr, "listening");
    let keep = state.clone();
    let served = axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve);
    let _ = tokio::task::spawn_blocking(move || drop(keep)).await;
    served
}
