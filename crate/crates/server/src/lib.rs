//! JSON API serving the collection, minimap and detail layers of saved
//! graphs, per-session expand state, and the interaction event log.

mod routes;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

pub use routes::router;
pub use state::{AppState, GraphEntry, SessionState};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("no `*.hkg.json` artifacts found in {0}")]
    NoArtifacts(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] hkg_core::store::StoreError),
    #[error("failed to bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub artifacts: PathBuf,
    pub port: u16,
    /// Event log path; defaults to `events.jsonl` in the artifacts directory.
    pub log: Option<PathBuf>,
    pub hide_threshold: u64,
}

impl ServerConfig {
    pub fn new(artifacts: impl Into<PathBuf>) -> Self {
        ServerConfig {
            artifacts: artifacts.into(),
            port: 8080,
            log: None,
            hide_threshold: hkg_core::hkg::DEFAULT_HIDE_THRESHOLD,
        }
    }

    pub fn log_path(&self) -> PathBuf {
        self.log
            .clone()
            .unwrap_or_else(|| self.artifacts.join("events.jsonl"))
    }
}

/// Loads artifacts and serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let state = Arc::new(AppState::load(&config)?);
    let addr = SocketAddr::from(([127, 0, 0, 1], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })?;
    log::info!(
        "serving {} graph(s) on http://{addr}",
        state.graphs.len()
    );
    axum::serve(listener, router(state))
        .await
        .map_err(|source| ServerError::Bind { addr, source })
}
