//! Review service: queue, decisions, ad-hoc resolution and lexicon management
//! over a [`store::Store`].

pub mod api;
pub mod store;

pub use api::{router, AppState, ServiceConfig};
pub use store::{Store, StoreBytes, StoreError};

/// Serves `app` until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: axum::Router) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
}
