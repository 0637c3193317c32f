use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use navis_cli::serve::{self, WireMessage};
use navis_core::{LiveHandle, LiveSession, RideProfile, SimConfig};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;

type Ws =
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

struct Harness {
    live: Option<LiveSession>,
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
}

impl Harness {
    async fn start() -> Harness {
        let live = LiveSession::spawn(SimConfig::default(), RideProfile::default(), None).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel();
        tokio::spawn(serve::serve(listener, live.handle(), async {
            let _ = rx.await;
        }));
        Harness {
            live: Some(live),
            addr,
            stop: Some(tx),
        }
    }

    fn handle(&self) -> LiveHandle {
        self.live.as_ref().unwrap().handle()
    }

    async fn connect(&self) -> (Ws, u64) {
        let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", self.addr))
            .await
            .unwrap();
        match next_message(&mut ws).await {
            WireMessage::Hello { writer } => (ws, writer),
            other => panic!("expected hello, got {other:?}"),
        }
    }

    async fn get(&self, path: &str) -> String {
        // minimal HTTP/1.1 client; the service closes after one response
        use tokio::io::{AsyncReadExt, AsyncWriteExt};
        let mut s = tokio::net::TcpStream::connect(self.addr).await.unwrap();
        s.write_all(
            format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").as_bytes(),
        )
        .await
        .unwrap();
        let mut buf = String::new();
        s.read_to_string(&mut buf).await.unwrap();
        assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
        buf.split_once("\r\n\r\n").unwrap().1.to_string()
    }

    fn shutdown(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.live.take().unwrap().shutdown().unwrap();
    }
}

async fn next_message(ws: &mut Ws) -> WireMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("message within 5 s")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn next_state(ws: &mut Ws) -> serde_json::Value {
    loop {
        let msg = next_message(ws).await;
        if matches!(msg, WireMessage::State { .. }) {
            return serde_json::to_value(msg).unwrap();
        }
    }
}

/// Most recent state, skipping whatever queued up while the test slept.
async fn latest_state(ws: &mut Ws) -> serde_json::Value {
    let mut last = next_state(ws).await;
    let deadline = tokio::time::Instant::now() + Duration::from_millis(150);
    while let Ok(Some(Ok(msg))) = tokio::time::timeout_at(deadline, ws.next()).await {
        if let Message::Text(t) = msg {
            let m: WireMessage = serde_json::from_str(t.as_str()).unwrap();
            if matches!(m, WireMessage::State { .. }) {
                last = serde_json::to_value(m).unwrap();
            }
        }
    }
    last
}

async fn send_input(ws: &mut Ws, rps: f64, deg: f64) {
    let m = serde_json::json!({"type": "input", "rps_target": rps, "handlebar_deg": deg});
    ws.send(Message::Text(m.to_string().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn right_handlebar_turns_right_over_the_socket() {
    let h = Harness::start().await;
    let (mut ws, writer) = h.connect().await;
    send_input(&mut ws, 1.0, 30.0).await;
    tokio::time::sleep(Duration::from_millis(900)).await;
    let a = latest_state(&mut ws).await;
    tokio::time::sleep(Duration::from_millis(500)).await;
    let b = latest_state(&mut ws).await;
    assert_eq!(b["writer"], writer);
    assert!(b["cmd"]["steering_delta_deg"].as_f64().unwrap() > 29.0);
    let (ha, hb) = (
        a["pose"]["heading_deg"].as_f64().unwrap(),
        b["pose"]["heading_deg"].as_f64().unwrap(),
    );
    assert!(hb > ha, "heading {ha} -> {hb}");
    assert!(b["t_us"].as_u64() > a["t_us"].as_u64());
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn last_writer_wins_between_two_clients() {
    let h = Harness::start().await;
    let (mut first, w1) = h.connect().await;
    let (mut second, w2) = h.connect().await;
    assert_ne!(w1, w2);

    send_input(&mut first, 1.0, 30.0).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    send_input(&mut second, 1.0, -30.0).await;
    tokio::time::sleep(Duration::from_millis(800)).await;

    let seen_by_first = latest_state(&mut first).await;
    assert_eq!(seen_by_first["writer"], w2);
    assert!(seen_by_first["cmd"]["steering_delta_deg"].as_f64().unwrap() < -29.0);
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn out_of_limit_and_malformed_inputs_are_refused() {
    let h = Harness::start().await;
    let (mut ws, _) = h.connect().await;
    send_input(&mut ws, 50.0, 0.0).await;
    loop {
        match next_message(&mut ws).await {
            WireMessage::Refused { reason } => {
                assert!(reason.contains("rps"), "{reason}");
                break;
            }
            WireMessage::State { .. } => continue,
            other => panic!("{other:?}"),
        }
    }
    ws.send(Message::Text("{not json".into())).await.unwrap();
    loop {
        match next_message(&mut ws).await {
            WireMessage::Refused { reason } => {
                assert!(reason.starts_with("malformed"), "{reason}");
                break;
            }
            _ => continue,
        }
    }
    assert_eq!(h.handle().snapshot().writer, None);
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn read_endpoints_report_state_and_metrics() {
    let h = Harness::start().await;
    h.handle().submit(5, 1.0, 0.0).unwrap();
    tokio::time::sleep(Duration::from_millis(700)).await;

    let state: serde_json::Value = serde_json::from_str(&h.get("/state").await).unwrap();
    assert_eq!(state["type"], "state");
    assert_eq!(state["writer"], 5);
    assert!(state["pose"]["x"].as_f64().unwrap() > 0.0);
    let link = &state["link"];
    assert!(link["received"].as_u64().unwrap() >= 1);

    let metrics = h.get("/metrics").await;
    let value = |name: &str| -> f64 {
        metrics
            .lines()
            .find_map(|l| l.strip_prefix(name)?.strip_prefix(' ')?.parse().ok())
            .unwrap_or_else(|| panic!("{name} missing in\n{metrics}"))
    };
    assert!(value("navis_commands_total") >= 3.0);
    assert_eq!(
        value("navis_link_received_total"),
        value("navis_link_applied_total")
    );
    assert_eq!(value("navis_link_latency_us"), 0.0);
    h.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn idle_service_does_not_disturb_the_session() {
    let h = Harness::start().await;
    tokio::time::sleep(Duration::from_millis(500)).await;
    let s = h.handle().snapshot();
    assert_eq!(s.commands, 3);
    assert_eq!(s.pose.x, 0.0);
    assert_eq!(s.writer, None);
    h.shutdown();
}
