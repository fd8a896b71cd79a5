//! WebSocket event service. Each named session is owned by one actor task
//! that applies inbound messages in arrival order; everything the session
//! emits is broadcast to every client attached to it.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use gesture_lang::session::{
    parse_line, Envelope, Inbound, InboundMessage, MessageError, Outbound, Session, SessionConfig, SessionError,
    SessionHeader, SCHEMA_VERSION,
};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};

/// Inbound messages waiting for a session actor.
const INBOUND_QUEUE: usize = 256;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Outbound messages buffered per client before overflow is reported.
    pub buffer: usize,
    /// Executor ticks per second while a plan runs. Without it the clock
    /// only moves with inbound timestamps.
    pub tick_hz: Option<f64>,
    pub session: SessionConfig,
    /// Header for sessions that have not received one.
    pub header: SessionHeader,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8765)),
            buffer: 1024,
            tick_hz: None,
            session: SessionConfig::default(),
            header: SessionHeader::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortBusy(SocketAddr),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("default session: {0}")]
    Session(#[from] SessionError),
    #[error("buffer must hold at least one message")]
    Buffer,
}

struct SessionHandle {
    inbound: mpsc::Sender<InboundMessage>,
    outbound: broadcast::Sender<Utf8Bytes>,
}

/// Live sessions by name.
pub struct Hub {
    config: ServeConfig,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    overflow: AtomicU64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub schema_version: u32,
    pub sessions: Vec<String>,
    /// Outbound messages dropped for slow readers since startup.
    pub overflow: u64,
}

impl Hub {
    fn new(config: ServeConfig) -> Self {
        Self {
            config,
            sessions: Mutex::new(HashMap::new()),
            overflow: AtomicU64::new(0),
        }
    }

    pub fn health(&self) -> Health {
        let mut sessions: Vec<String> = self.sessions.lock().unwrap().keys().cloned().collect();
        sessions.sort();
        Health {
            schema_version: SCHEMA_VERSION,
            sessions,
            overflow: self.overflow.load(Ordering::Relaxed),
        }
    }

    /// Sender and a fresh subscription for `name`, starting its actor on
    /// first use.
    pub fn connect(self: &Arc<Self>, name: &str) -> (mpsc::Sender<InboundMessage>, Subscription) {
        let mut sessions = self.sessions.lock().unwrap();
        let h = sessions.entry(name.to_string()).or_insert_with(|| {
            let (tx, rx) = mpsc::channel(INBOUND_QUEUE);
            let (out, _) = broadcast::channel(self.config.buffer);
            let session = Session::new(self.config.header.clone(), self.config.session.clone())
                .expect("default header checked at bind");
            tokio::spawn(run_actor(session, rx, out.clone(), self.config.tick_hz));
            SessionHandle { inbound: tx, outbound: out }
        });
        let sub = Subscription { rx: h.outbound.subscribe(), hub: self.clone() };
        (h.inbound.clone(), sub)
    }
}

/// One client's view of a session's outbound stream.
pub struct Subscription {
    rx: broadcast::Receiver<Utf8Bytes>,
    hub: Arc<Hub>,
}

impl Subscription {
    /// Next outbound line. Messages lost to a full buffer come back as a
    /// single `overflow` message counting them.
    pub async fn next(&mut self) -> Option<Utf8Bytes> {
        match self.rx.recv().await {
            Ok(l) => Some(l),
            Err(broadcast::error::RecvError::Lagged(n)) => {
                self.hub.overflow.fetch_add(n, Ordering::Relaxed);
                Some(local(Outbound::Overflow { dropped: n }))
            }
            Err(broadcast::error::RecvError::Closed) => None,
        }
    }
}

async fn run_actor(
    mut session: Session,
    mut inbound: mpsc::Receiver<InboundMessage>,
    outbound: broadcast::Sender<Utf8Bytes>,
    tick_hz: Option<f64>,
) {
    let period = tick_hz.filter(|hz| *hz > 0.0).map(|hz| 1.0 / hz);
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(period.unwrap_or(3600.0)));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        let out = tokio::select! {
            m = inbound.recv() => match m {
                Some(m) => session.handle(&m),
                None => break,
            },
            _ = ticker.tick(), if period.is_some() => {
                if !session.is_busy() {
                    continue;
                }
                let t = session.clock() + period.unwrap_or_default();
                session.handle(&Envelope::new(0, t, Inbound::Tick))
            }
        };
        for m in out {
            // no subscribers is fine; the session keeps running
            let _ = outbound.send(m.to_line().into());
        }
    }
}

/// Reply that only the sending client sees; `seq` 0 marks it as outside
/// the session sequence.
fn local(body: Outbound) -> Utf8Bytes {
    Envelope::new(0, 0.0, body).to_line().into()
}

#[derive(Debug, Default, Deserialize)]
struct Attach {
    #[serde(default)]
    role: Role,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Role {
    #[default]
    Operator,
    /// May only ask for a `sync`.
    Observer,
}

async fn ws_handler(
    ws: WebSocketUpgrade,
    Path(name): Path<String>,
    Query(attach): Query<Attach>,
    State(hub): State<Arc<Hub>>,
) -> Response {
    ws.on_upgrade(move |socket| client(socket, hub, name, attach.role))
}

async fn client(socket: WebSocket, hub: Arc<Hub>, name: String, role: Role) {
    let (to_session, mut events) = hub.connect(&name);
    let (mut sink, mut stream) = socket.split();
    let (reply, mut replies) = mpsc::unbounded_channel::<Utf8Bytes>();
    let writer = tokio::spawn(async move {
        loop {
            let line = tokio::select! {
                r = replies.recv() => match r {
                    Some(l) => l,
                    None => break,
                },
                e = events.next() => match e {
                    Some(l) => l,
                    None => break,
                },
            };
            if sink.send(Message::Text(line)).await.is_err() {
                break;
            }
        }
    });
    let mut line = 0;
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        line += 1;
        let answer = match parse_line::<Inbound>(text.as_str(), line) {
            Err(MessageError::Version { found, .. }) => Some(Outbound::Incompatible { expected: SCHEMA_VERSION, found }),
            Err(e) => Some(Outbound::Error { message: e.to_string() }),
            Ok(m) if role == Role::Observer && m.body != Inbound::Sync => Some(Outbound::Error {
                message: format!("observers may only send `sync`, got `{}`", inbound_kind(&m.body)),
            }),
            Ok(m) => {
                if to_session.send(m).await.is_err() {
                    break;
                }
                None
            }
        };
        if let Some(body) = answer {
            let _ = reply.send(local(body));
        }
    }
    drop(reply);
    writer.abort();
}

fn inbound_kind(m: &Inbound) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(String::from))
        .unwrap_or_default()
}

async fn health(State(hub): State<Arc<Hub>>) -> impl IntoResponse {
    Json(hub.health())
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/ws/{session}", get(ws_handler))
        .route("/health", get(health))
        .with_state(hub)
}

pub struct Server {
    listener: TcpListener,
    hub: Arc<Hub>,
}

impl Server {
    /// Claims the port. The default session header is checked here so a
    /// bad scene fails at startup rather than on first connect.
    pub async fn bind(config: ServeConfig) -> Result<Self, ServeError> {
        if config.buffer == 0 {
            return Err(ServeError::Buffer);
        }
        Session::new(config.header.clone(), config.session.clone())?;
        let listener = TcpListener::bind(config.addr).await.map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => ServeError::PortBusy(config.addr),
            _ => ServeError::Bind { addr: config.addr, source: e },
        })?;
        Ok(Self { listener, hub: Arc::new(Hub::new(config)) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn hub(&self) -> Arc<Hub> {
        self.hub.clone()
    }

    pub async fn run(self) -> std::io::Result<()> {
        axum::serve(self.listener, router(self.hub)).await
    }

    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        axum::serve(self.listener, router(self.hub)).with_graceful_shutdown(shutdown).await
    }
}
