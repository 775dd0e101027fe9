use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use hieralloc_service::{router, ScenarioStore, ServiceConfig};
use tracing_subscriber::EnvFilter;

/// Scenario, forecast and solve API for the allocation engine.
#[derive(Debug, Parser)]
#[command(name = "hieralloc-service", version)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// JSON file holding all scenarios. Created on first write.
    #[arg(long, default_value = "hieralloc-store.json")]
    store: PathBuf,
    /// Built UI assets to serve at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Browser origin allowed by CORS. Any origin when unset.
    #[arg(long)]
    cors_origin: Option<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();

    let store = ScenarioStore::open(&args.store)
        .with_context(|| format!("opening store {}", args.store.display()))?;
    let config = ServiceConfig {
        cors_origin: args.cors_origin,
        static_dir: args.static_dir,
    };
    let app = router(Arc::new(store), &config);

    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .context("invalid --host/--port")?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, store = %args.store.display(), "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
