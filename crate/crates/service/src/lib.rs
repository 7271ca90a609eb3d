//! File-backed store and HTTP/JSON API for the clinical reasoning trainer.
//!
//! [`Store`] owns the corpus snapshot and every session's append-only action
//! log; [`api::router`] exposes it under `/v1`.

pub mod api;
mod config;
mod error;
mod store;

use std::sync::Arc;

use clinreason_core::inquiry::ModelAdapter;
use clinreason_core::Clock;

pub use config::{ServiceConfig, DEFAULT_LISTEN_ADDR, DEFAULT_STORE_ROOT};
pub use error::StoreError;
pub use store::{IngestSummary, InquiryResult, Store, StoreRoot, LOG_FILE, SNAPSHOT_FILE};

/// Opens the store named by `config` and serves the API until interrupted.
pub async fn serve(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let root = StoreRoot::at(&config.store_root);
    let adapter = ModelAdapter::from_config(&config.adapter);
    let store = tokio::task::spawn_blocking(move || Store::open(root, clock, adapter)).await??;
    let state = api::AppState { store: Arc::new(store), api_token: config.api_token.clone() };
    let listener = tokio::net::TcpListener::bind(&config.listen_addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
