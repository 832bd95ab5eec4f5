use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::Args;
use simpleds_server::{Server, ServerState};

use crate::settings::{self, Classify, Common, Failure};

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    common: Common,
    /// TCP port for newline-delimited JSON; 0 picks a free port.
    #[arg(long)]
    port: Option<u16>,
    /// HTTP port for `/ws` and the status endpoints; 0 picks a free port.
    #[arg(long)]
    ws_port: Option<u16>,
    #[arg(long)]
    host: Option<String>,
    /// Policy that drives interactive sessions.
    #[arg(long, value_name = "PATH")]
    policy: Option<PathBuf>,
    /// Seconds to wait for a human reply before aborting the episode.
    #[arg(long, value_name = "SECS")]
    timeout: Option<u64>,
}

pub fn run(args: ServeArgs) -> Result<(), Failure> {
    let config = args.common.config(|c| {
        if let Some(p) = args.port {
            c.server.port = p;
        }
        if let Some(p) = args.ws_port {
            c.server.ws_port = p;
        }
        if let Some(h) = &args.host {
            c.server.host = h.clone();
        }
        if let Some(t) = args.timeout {
            c.server.human_timeout_secs = t;
        }
    })?;
    let host: IpAddr = config
        .server
        .host
        .parse()
        .map_err(|e| Failure::Data(anyhow!("host {:?}: {e}", config.server.host)))?;
    let domain = settings::domain(&config)?;
    let mut state = ServerState::new(domain.clone(), config.env_config(), config.seed)
        .with_human_timeout(Duration::from_secs(config.server.human_timeout_secs));
    if let Some(path) = &args.policy {
        state = state.with_policy(Arc::new(settings::policy(path, &domain)?));
    }

    let runtime = tokio::runtime::Runtime::new().runtime()?;
    runtime.block_on(async move {
        let server = Server::bind(
            state,
            SocketAddr::new(host, config.server.port),
            SocketAddr::new(host, config.server.ws_port),
        )
        .await
        .context("binding listeners")
        .runtime()?;
        let tcp = server.tcp_addr().runtime()?;
        let ws = server.ws_addr().runtime()?;
        println!("tcp {tcp}");
        println!("ws {ws}");
        std::io::stdout().flush().runtime()?;
        tracing::info!(%tcp, %ws, interactive = args.policy.is_some(), "serving");
        tokio::select! {
            result = server.run() => result.context("server stopped").runtime(),
            _ = tokio::signal::ctrl_c() => {
                tracing::info!("interrupted");
                Ok(())
            }
        }
    })
}
