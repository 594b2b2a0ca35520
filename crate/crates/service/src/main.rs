use std::path::PathBuf;

use clap::Parser;
use lcsched_service::{app, AppState, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "Coordination service for learning-curve team scheduling")]
struct Args {
    /// TOML config file; LCSCHED_PORT, LCSCHED_DATA_DIR and
    /// LCSCHED_PRIOR_LIBRARY override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    if let Err(e) = run(Args::parse()).await {
        tracing::error!(error = %e, "service stopped");
        eprintln!("lcsched-service: {e}");
        std::process::exit(1);
    }
}

async fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig::load(args.config.as_deref())?;
    let addr = format!("{}:{}", config.host, config.port);
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(addr = %listener.local_addr()?, sessions = state.session_ids().len(), "listening");
    axum::serve(listener, app(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
