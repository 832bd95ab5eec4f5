//! Serves dialogue sessions to learning clients and chat front ends.
//!
//! Two listeners share one schema: newline-delimited JSON over plain TCP, and
//! one JSON message per text frame on `/ws` of the HTTP port. Every
//! connection owns an isolated [`ProtocolSession`]; only the domain data and
//! the optional policy are shared.

use std::fmt::Display;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{Sink, SinkExt, Stream, StreamExt};
use serde::Serialize;
use simpleds_core::domain::act::catalog_strings;
use simpleds_core::env::protocol::{ProtocolSession, ServerMessage};
use simpleds_core::{Domain, EnvConfig, Policy};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

pub const DEFAULT_HUMAN_TIMEOUT: Duration = Duration::from_secs(120);

/// Read-only resources and counters shared by all connections.
pub struct ServerState {
    domain: Arc<Domain>,
    config: EnvConfig,
    policy: Option<Arc<Policy>>,
    seed: u64,
    human_timeout: Duration,
    next_session: AtomicU64,
    active: AtomicUsize,
}

impl ServerState {
    /// Connection `k` gets seed `seed + k` unless its hello names one.
    pub fn new(domain: Arc<Domain>, config: EnvConfig, seed: u64) -> Self {
        Self {
            domain,
            config,
            policy: None,
            seed,
            human_timeout: DEFAULT_HUMAN_TIMEOUT,
            next_session: AtomicU64::new(0),
            active: AtomicUsize::new(0),
        }
    }

    /// Enables interactive mode.
    pub fn with_policy(mut self, policy: Arc<Policy>) -> Self {
        self.policy = Some(policy);
        self
    }

    pub fn with_human_timeout(mut self, timeout: Duration) -> Self {
        self.human_timeout = timeout;
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn sessions(&self) -> SessionStats {
        SessionStats {
            active: self.active.load(Ordering::SeqCst),
            served: self.next_session.load(Ordering::SeqCst),
        }
    }

    fn open(self: &Arc<Self>) -> (ProtocolSession, ActiveGuard) {
        let k = self.next_session.fetch_add(1, Ordering::SeqCst);
        self.active.fetch_add(1, Ordering::SeqCst);
        let session = ProtocolSession::new(
            self.domain.clone(),
            self.config.clone(),
            self.policy.clone(),
            self.seed.wrapping_add(k),
        );
        (session, ActiveGuard(self.clone()))
    }
}

struct ActiveGuard(Arc<ServerState>);

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        self.0.active.fetch_sub(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SessionStats {
    pub active: usize,
    /// Connections accepted since start.
    pub served: u64,
}

#[derive(Debug, Error)]
pub enum ConnectionError {
    #[error("read failed: {0}")]
    Read(#[from] io::Error),
    #[error("write failed: {0}")]
    Write(String),
}

/// Runs one session over a stream of received lines and a sink of replies.
///
/// Ends when the peer disconnects or says bye. While an interactive session
/// waits for its user, silence longer than the human timeout aborts the
/// episode and reports a `timeout` error; the connection stays open.
pub async fn drive<St, Si>(
    state: Arc<ServerState>,
    mut incoming: St,
    mut outgoing: Si,
) -> Result<(), ConnectionError>
where
    St: Stream<Item = io::Result<String>> + Unpin,
    Si: Sink<String> + Unpin,
    Si::Error: Display,
{
    let (mut protocol, _guard) = state.open();
    loop {
        let next = if protocol.awaiting_user() {
            match tokio::time::timeout(state.human_timeout, incoming.next()).await {
                Ok(next) => next,
                Err(_) => {
                    if let Some(msg) = protocol.user_timed_out() {
                        send(&mut outgoing, &msg).await?;
                    }
                    continue;
                }
            }
        } else {
            incoming.next().await
        };
        let Some(line) = next else { break };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = protocol.handle_line(&line);
        send(&mut outgoing, &reply).await?;
        if protocol.is_closed() {
            break;
        }
    }
    Ok(())
}

async fn send<Si>(outgoing: &mut Si, msg: &ServerMessage) -> Result<(), ConnectionError>
where
    Si: Sink<String> + Unpin,
    Si::Error: Display,
{
    outgoing
        .send(msg.to_line())
        .await
        .map_err(|e| ConnectionError::Write(e.to_string()))
}

/// One newline-delimited JSON session over a TCP stream.
pub async fn handle_tcp(state: Arc<ServerState>, stream: TcpStream) -> Result<(), ConnectionError> {
    stream.set_nodelay(true)?;
    let (read, write) = stream.into_split();
    let lines = futures::stream::unfold(BufReader::new(read).lines(), |mut lines| async move {
        match lines.next_line().await {
            Ok(Some(line)) => Some((Ok(line), lines)),
            Ok(None) => None,
            Err(e) => Some((Err(e), lines)),
        }
    });
    let replies = futures::sink::unfold(write, |mut write, line: String| async move {
        write.write_all(line.as_bytes()).await?;
        write.write_all(b"\n").await?;
        write.flush().await?;
        Ok::<_, io::Error>(write)
    });
    drive(state, Box::pin(lines), Box::pin(replies)).await
}

/// Accepts TCP clients forever; a failing connection never stops the listener.
pub async fn serve_tcp(listener: TcpListener, state: Arc<ServerState>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let state = state.clone();
                tokio::spawn(async move {
                    tracing::debug!(%peer, "tcp session opened");
                    if let Err(e) = handle_tcp(state, stream).await {
                        tracing::warn!(%peer, "tcp session ended: {e}");
                    }
                });
            }
            Err(e) => {
                tracing::warn!("accept failed: {e}");
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
        }
    }
}

/// One session over a WebSocket: text frames carry single messages.
pub async fn handle_ws(state: Arc<ServerState>, socket: WebSocket) -> Result<(), ConnectionError> {
    let (sink, stream) = socket.split();
    let frames = stream.filter_map(|frame| async move {
        match frame {
            Ok(Message::Text(text)) => Some(Ok(text.as_str().to_string())),
            Ok(Message::Binary(bytes)) => Some(Ok(String::from_utf8_lossy(&bytes).into_owned())),
            Ok(_) => None,
            Err(e) => Some(Err(io::Error::other(e))),
        }
    });
    let replies =
        sink.with(|line: String| async move { Ok::<_, axum::Error>(Message::Text(line.into())) });
    drive(state, Box::pin(frames), Box::pin(replies)).await
}

#[derive(Debug, Serialize)]
struct CatalogInfo {
    lang: String,
    catalog: Vec<String>,
    vocabulary: Vec<String>,
}

/// `/ws`, `/health`, `/catalog` and `/sessions`.
pub fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/health", get(|| async { "ok" }))
        .route("/catalog", get(catalog))
        .route("/sessions", get(sessions))
        .with_state(state)
}

async fn ws_upgrade(
    State(state): State<Arc<ServerState>>,
    ws: WebSocketUpgrade,
) -> impl IntoResponse {
    ws.on_upgrade(|socket| async move {
        if let Err(e) = handle_ws(state, socket).await {
            tracing::warn!("websocket session ended: {e}");
        }
    })
}

async fn catalog(State(state): State<Arc<ServerState>>) -> Json<CatalogInfo> {
    Json(CatalogInfo {
        lang: state.domain.pack.templates.lang().to_string(),
        catalog: catalog_strings(),
        vocabulary: state.domain.vocab.words().to_vec(),
    })
}

async fn sessions(State(state): State<Arc<ServerState>>) -> Json<SessionStats> {
    Json(state.sessions())
}

/// Both listeners, bound and ready.
pub struct Server {
    state: Arc<ServerState>,
    tcp: TcpListener,
    ws: TcpListener,
}

impl Server {
    pub async fn bind(state: ServerState, tcp: SocketAddr, ws: SocketAddr) -> io::Result<Self> {
        Ok(Self {
            state: Arc::new(state),
            tcp: TcpListener::bind(tcp).await?,
            ws: TcpListener::bind(ws).await?,
        })
    }

    pub fn tcp_addr(&self) -> io::Result<SocketAddr> {
        self.tcp.local_addr()
    }

    pub fn ws_addr(&self) -> io::Result<SocketAddr> {
        self.ws.local_addr()
    }

    pub fn state(&self) -> &Arc<ServerState> {
        &self.state
    }

    /// Serves until the HTTP listener fails.
    pub async fn run(self) -> io::Result<()> {
        let tcp = tokio::spawn(serve_tcp(self.tcp, self.state.clone()));
        let result = axum::serve(self.ws, router(self.state)).await;
        tcp.abort();
        result
    }

    /// Runs in the background; returns the TCP and WebSocket addresses.
    pub fn spawn(self) -> io::Result<RunningServer> {
        let tcp_addr = self.tcp_addr()?;
        let ws_addr = self.ws_addr()?;
        let state = self.state.clone();
        let handle = tokio::spawn(self.run());
        Ok(RunningServer {
            tcp_addr,
            ws_addr,
            state,
            handle,
        })
    }
}

pub struct RunningServer {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    pub state: Arc<ServerState>,
    pub handle: JoinHandle<io::Result<()>>,
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}
