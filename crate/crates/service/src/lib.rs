//! HTTP backend for the annotate → fit → inspect loop.
//!
//! One in-memory session holds a loaded stack and the current annotations.
//! Runs are queued and executed one at a time, in submission order, by a
//! single worker; their artifacts land under `<out_dir>/<run_id>/`.

mod api;
mod imaging;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;

pub use api::router;
pub use imaging::{downsample, parse_scale};
pub use session::{RunRecord, RunRequest, RunStatus};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Run artifacts are written below this directory.
    pub out_dir: PathBuf,
    /// Static UI bundle served at `/`; a placeholder page when absent.
    pub ui_dir: Option<PathBuf>,
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(config)).await
}
