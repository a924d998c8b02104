//! HTTP edit service.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/sessions` | upload a PGM/PPM/PNG image, returns `201 {"id",...}` |
//! | `POST` | `/sessions/{id}/edit` | body: drag spec JSON with an inline mask; `?trace=true&seed=N` |
//! | `GET` | `/sessions/{id}/artifacts/{kind}` | `preview`, `overlay`, `field`, `corr`, `trace`, `mask_src`, `mask_dst`, `summary` |
//! | `GET` | `/healthz` | liveness |
//!
//! Errors are `{"error":{"code","message"}}`.

pub mod api;
pub mod config;
pub mod store;

pub use api::{router, AppState};
pub use config::ServiceConfig;

/// Binds `cfg.addr()` and serves until the process is stopped.
pub async fn serve(cfg: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(cfg.addr()).await?;
    serve_on(listener, cfg).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, cfg: ServiceConfig) -> std::io::Result<()> {
    let app = router(AppState::new(&cfg)?, &cfg);
    axum::serve(listener, app).await
}
