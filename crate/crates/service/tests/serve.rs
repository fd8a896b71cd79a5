use std::time::Duration;

use futures::{SinkExt, StreamExt};
use gesture_lang::classify::Channel;
use gesture_lang::episode::GestureEvent;
use gesture_lang::geometry::Vec3;
use gesture_lang::session::{parse_line, Envelope, Inbound, Mode, Outbound, OutboundMessage, SessionHeader, SCHEMA_VERSION};
use gesture_lang::simworld::scenes;
use gesture_service::server::{ServeConfig, ServeError, Server};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(config: ServeConfig) -> (String, std::sync::Arc<gesture_service::server::Hub>) {
    let server = Server::bind(ServeConfig { addr: "127.0.0.1:0".parse().unwrap(), ..config }).await.unwrap();
    let base = format!("ws://{}", server.local_addr());
    let hub = server.hub();
    tokio::spawn(server.run());
    (base, hub)
}

async fn connect(url: &str) -> Ws {
    connect_async(url).await.unwrap().0
}

async fn send(ws: &mut Ws, seq: u64, t: f64, body: Inbound) {
    ws.send(Message::text(Envelope::new(seq, t, body).to_line())).await.unwrap();
}

async fn recv(ws: &mut Ws) -> OutboundMessage {
    let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("no message in time");
    let text = msg.unwrap().unwrap().into_text().unwrap();
    parse_line(text.as_str(), 0).unwrap()
}

async fn recv_until(ws: &mut Ws, kind: &str) -> Vec<OutboundMessage> {
    let mut out = Vec::new();
    loop {
        let m = recv(ws).await;
        let done = m.body.kind() == kind;
        out.push(m);
        if done {
            return out;
        }
    }
}

fn ev(label: &str, channel: Channel, start: f64, target: Option<&str>, pinch: Option<f64>) -> Vec<GestureEvent> {
    let mut e = GestureEvent::new(label, channel, start, start + 0.5, 0.99);
    e.target = target.map(String::from);
    e.pinch = pinch;
    vec![e]
}

/// thumbsup, mug, bowl, 5 cm pinch as one synthetic episode each.
fn thumbsup_move() -> Vec<Vec<GestureEvent>> {
    vec![
        ev("thumbsup", Channel::Static, 0.0, None, None),
        ev("point", Channel::Deictic, 1.0, Some("mug"), None),
        ev("point", Channel::Deictic, 2.0, Some("bowl"), None),
        ev("pinch", Channel::Static, 3.0, None, Some(0.05)),
    ]
}

#[tokio::test]
async fn busy_port_is_a_startup_error() {
    let first = Server::bind(ServeConfig { addr: "127.0.0.1:0".parse().unwrap(), ..Default::default() }).await.unwrap();
    let addr = first.local_addr();
    match Server::bind(ServeConfig { addr, ..Default::default() }).await {
        Err(ServeError::PortBusy(a)) => assert_eq!(a, addr),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("second bind succeeded"),
    }
}

#[tokio::test]
async fn unknown_default_scene_fails_at_bind() {
    let header = SessionHeader { scene: Some("moon".into()), ..Default::default() };
    let r = Server::bind(ServeConfig { addr: "127.0.0.1:0".parse().unwrap(), header, ..Default::default() }).await;
    assert!(matches!(r, Err(ServeError::Session(_))));
}

#[tokio::test]
async fn observers_receive_identical_sequences() {
    let (base, _) = start(ServeConfig::default()).await;
    let mut op = connect(&format!("{base}/ws/room")).await;
    let mut a = connect(&format!("{base}/ws/room?role=observer")).await;
    let mut b = connect(&format!("{base}/ws/room?role=observer")).await;
    // the sync reply proves every client is subscribed before input starts
    send(&mut op, 1, 0.0, Inbound::Sync).await;
    for ws in [&mut op, &mut a, &mut b] {
        recv_until(ws, "world").await;
    }
    for (k, events) in thumbsup_move().into_iter().enumerate() {
        send(&mut op, k as u64 + 2, k as f64 + 0.6, Inbound::Episode { events }).await;
    }
    send(&mut op, 9, 10.0, Inbound::Tick).await;
    let la = recv_until(&mut a, "outcome").await;
    let lb = recv_until(&mut b, "outcome").await;
    assert_eq!(la, lb);
    assert!(la.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    let intent = la.iter().find_map(|m| match &m.body {
        Outbound::Intent { text, .. } => Some(text.clone()),
        _ => None,
    });
    assert_eq!(intent.as_deref(), Some("(move, mug, [bowl, 50%])"));
    assert!(matches!(la.last().unwrap().body, Outbound::Outcome { ref outcome, .. } if outcome.is_success()));
}

#[tokio::test]
async fn mode_switch_mid_plan_is_acknowledged_and_resumes() {
    let (base, _) = start(ServeConfig::default()).await;
    let mut op = connect(&format!("{base}/ws/switch")).await;
    for (k, events) in thumbsup_move().into_iter().enumerate() {
        send(&mut op, k as u64 + 1, k as f64 + 0.6, Inbound::Episode { events }).await;
    }
    recv_until(&mut op, "plan").await;
    send(&mut op, 5, 3.75, Inbound::Mode { mode: Mode::Teleop }).await;
    let log = recv_until(&mut op, "mode").await;
    assert_eq!(log.last().unwrap().body, Outbound::Mode { mode: Mode::Teleop, paused: true });
    assert!(!log.iter().any(|m| m.body.kind() == "outcome"));
    send(&mut op, 6, 4.0, Inbound::Teleop { palm: Vec3::new(0.0, 0.1, 0.4), yaw: 0.0, grip: false }).await;
    let m = recv(&mut op).await;
    assert_eq!(m.body.kind(), "teleop");
    send(&mut op, 7, 5.0, Inbound::Mode { mode: Mode::HighLevelGesture }).await;
    let ack = recv_until(&mut op, "mode").await;
    assert_eq!(ack.last().unwrap().body, Outbound::Mode { mode: Mode::HighLevelGesture, paused: false });
    send(&mut op, 8, 9.0, Inbound::Tick).await;
    let rest = recv_until(&mut op, "outcome").await;
    assert!(matches!(rest.last().unwrap().body, Outbound::Outcome { ref outcome, .. } if outcome.is_success()));
}

#[tokio::test]
async fn realtime_ticks_drive_the_plan() {
    let (base, _) = start(ServeConfig { tick_hz: Some(50.0), ..Default::default() }).await;
    let mut op = connect(&format!("{base}/ws/live")).await;
    for (k, events) in thumbsup_move().into_iter().enumerate() {
        send(&mut op, k as u64 + 1, k as f64 + 0.6, Inbound::Episode { events }).await;
    }
    let log = recv_until(&mut op, "outcome").await;
    assert!(log.iter().filter(|m| m.body.kind() == "tick").count() >= 5);
}

#[tokio::test]
async fn version_mismatch_and_read_only_observers() {
    let (base, _) = start(ServeConfig::default()).await;
    let mut op = connect(&format!("{base}/ws/v")).await;
    op.send(Message::text(r#"{"v":9,"seq":1,"t":0,"type":"sync"}"#)).await.unwrap();
    let m = recv(&mut op).await;
    assert_eq!(m.seq, 0);
    assert_eq!(m.body, Outbound::Incompatible { expected: SCHEMA_VERSION, found: 9 });
    op.send(Message::text("not json")).await.unwrap();
    assert_eq!(recv(&mut op).await.body.kind(), "error");

    let mut obs = connect(&format!("{base}/ws/v?role=observer")).await;
    send(&mut obs, 1, 0.0, Inbound::Mode { mode: Mode::Teleop }).await;
    match recv(&mut obs).await.body {
        Outbound::Error { message } => assert!(message.contains("observers"), "{message}"),
        b => panic!("{b:?}"),
    }
    send(&mut obs, 2, 0.0, Inbound::Sync).await;
    let snapshot = recv_until(&mut obs, "world").await;
    assert_eq!(snapshot[0].body, Outbound::Mode { mode: Mode::HighLevelGesture, paused: false });
}

#[tokio::test]
async fn ray_highlight_names_grid_object() {
    let (base, _) = start(ServeConfig::default()).await;
    let mut op = connect(&format!("{base}/ws/grid")).await;
    let header = SessionHeader { scene: Some("grid9".into()), ..Default::default() };
    send(&mut op, 1, 0.0, Inbound::Session(header)).await;
    recv_until(&mut op, "world").await;
    let w = scenes::grid9();
    for (k, (id, o)) in w.objects.iter().enumerate() {
        let to = o.pose.position;
        send(&mut op, k as u64 + 2, 0.1 * k as f64, Inbound::Ray { from: to + Vec3::new(-0.1, -0.3, 0.3), to }).await;
        match recv(&mut op).await.body {
            Outbound::Deictic { target, .. } => assert_eq!(target.as_ref(), Some(id)),
            b => panic!("{b:?}"),
        }
    }
}

#[tokio::test]
async fn slow_reader_gets_overflow_count() {
    let server = Server::bind(ServeConfig { addr: "127.0.0.1:0".parse().unwrap(), buffer: 4, ..Default::default() })
        .await
        .unwrap();
    let hub = server.hub();
    let (tx, mut slow) = hub.connect("slow");
    let (_, mut fast) = hub.connect("slow");
    let to = Vec3::new(0.0, 0.0, 0.0);
    for k in 0..20 {
        tx.send(Envelope::new(k + 1, 0.0, Inbound::Ray { from: Vec3::new(0.0, -0.4, 0.4), to })).await.unwrap();
        // keep one reader current so only the other one lags
        fast.next().await.unwrap();
    }
    let first: OutboundMessage = parse_line(slow.next().await.unwrap().as_str(), 0).unwrap();
    let dropped = match first.body {
        Outbound::Overflow { dropped } => dropped,
        b => panic!("{b:?}"),
    };
    assert_eq!(dropped, 16);
    let mut rest = 0;
    while let Ok(Some(_)) = tokio::time::timeout(Duration::from_millis(50), slow.next()).await {
        rest += 1;
    }
    assert_eq!(dropped as usize + rest, 20, "every message delivered or counted");
    assert_eq!(hub.health().overflow, 16);
    assert_eq!(hub.health().sessions, vec!["slow".to_string()]);
}
