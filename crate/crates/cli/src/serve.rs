//! Live state service: HTTP read endpoints plus a WebSocket stream.
//!
//! * `GET /state` - current snapshot as JSON
//! * `GET /metrics` - flat `name value` lines
//! * `/ws` - server pushes `state` messages at [`PUSH_HZ`]; clients send
//!   `input` messages that are forwarded to the emulator

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use navis_core::{LiveHandle, StateSnapshot};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub const PUSH_HZ: u64 = 30;

#[derive(Clone)]
struct AppState {
    session: LiveHandle,
    next_writer: Arc<AtomicU64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireCommand {
    pub throttle: f64,
    pub steering_delta_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireLink {
    pub received: u64,
    pub applied: u64,
    pub stale_dropped: u64,
    pub corrupt_dropped: u64,
}

/// Everything that travels over `/ws` and `GET /state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WireMessage {
    State {
        t_us: u64,
        pose: WirePose,
        cmd: WireCommand,
        link: WireLink,
        failsafe_active: bool,
        writer: Option<u64>,
    },
    Input {
        rps_target: f64,
        handlebar_deg: f64,
    },
    Refused {
        reason: String,
    },
    /// Sent once on connect so a client knows its own id.
    Hello {
        writer: u64,
    },
}

impl From<&StateSnapshot> for WireMessage {
    fn from(s: &StateSnapshot) -> Self {
        WireMessage::State {
            t_us: s.t_us,
            pose: WirePose {
                x: s.pose.x,
                y: s.pose.y,
                heading_deg: s.pose.heading_deg(),
            },
            cmd: WireCommand {
                throttle: s.cmd.throttle,
                steering_delta_deg: s.cmd.steering_delta_deg,
            },
            link: WireLink {
                received: s.link.received,
                applied: s.link.applied,
                stale_dropped: s.link.stale_dropped,
                corrupt_dropped: s.link.corrupt_dropped,
            },
            failsafe_active: s.failsafe_active,
            writer: s.writer,
        }
    }
}

pub fn router(session: LiveHandle) -> Router {
    let state = AppState {
        session,
        next_writer: Arc::new(AtomicU64::new(1)),
    };
    Router::new()
        .route("/state", get(get_state))
        .route("/metrics", get(get_metrics))
        .route("/ws", get(ws_upgrade))
        .with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    session: LiveHandle,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(session))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn get_state(State(app): State<AppState>) -> Json<WireMessage> {
    Json(WireMessage::from(&app.session.snapshot()))
}

pub fn metrics_text(s: &StateSnapshot) -> String {
    let mut out = String::new();
    let mut line = |name: &str, value: &dyn std::fmt::Display| {
        let _ = writeln!(out, "navis_{name} {value}");
    };
    line("sim_time_us", &s.t_us);
    line("commands_total", &s.commands);
    line("datagrams_sent_total", &s.datagrams_sent);
    line("link_received_total", &s.link.received);
    line("link_applied_total", &s.link.applied);
    line("link_stale_dropped_total", &s.link.stale_dropped);
    line("link_corrupt_dropped_total", &s.link.corrupt_dropped);
    line("failsafe_active", &u8::from(s.failsafe_active));
    if let Some(lat) = s.last_latency_us {
        line("link_latency_us", &lat);
    }
    line("pose_x_m", &s.pose.x);
    line("pose_y_m", &s.pose.y);
    line("pose_heading_deg", &s.pose.heading_deg());
    line("cmd_throttle", &s.cmd.throttle);
    line("cmd_steering_delta_deg", &s.cmd.steering_delta_deg);
    out
}

async fn get_metrics(State(app): State<AppState>) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "text/plain; version=0.0.4")],
        metrics_text(&app.session.snapshot()),
    )
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    let writer = app.next_writer.fetch_add(1, Ordering::Relaxed);
    ws.on_upgrade(move |socket| client_loop(socket, app.session, writer))
}

fn encode(msg: &WireMessage) -> Message {
    Message::Text(
        serde_json::to_string(msg)
            .expect("wire message serializes")
            .into(),
    )
}

/// Handle one inbound text message; returns a refusal to send back, if any.
fn handle_input(session: &LiveHandle, writer: u64, text: &str) -> Option<WireMessage> {
    let refuse = |reason: String| Some(WireMessage::Refused { reason });
    // tolerate newline-delimited batches
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<WireMessage>(line) {
            Ok(WireMessage::Input {
                rps_target,
                handlebar_deg,
            }) => {
                if let Err(reason) = session.submit(writer, rps_target, handlebar_deg) {
                    return refuse(reason);
                }
            }
            Ok(_) => return refuse("only input messages are accepted".into()),
            Err(e) => return refuse(format!("malformed message: {e}")),
        }
    }
    None
}

async fn client_loop(mut socket: WebSocket, session: LiveHandle, writer: u64) {
    if socket
        .send(encode(&WireMessage::Hello { writer }))
        .await
        .is_err()
    {
        return;
    }
    let mut push = tokio::time::interval(Duration::from_micros(1_000_000 / PUSH_HZ));
    push.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            _ = push.tick() => {
                let msg = WireMessage::from(&session.snapshot());
                if socket.send(encode(&msg)).await.is_err() {
                    return;
                }
            }
            incoming = socket.recv() => {
                let reply = match incoming {
                    Some(Ok(Message::Text(text))) => handle_input(&session, writer, text.as_str()),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => None,
                };
                if let Some(reply) = reply {
                    if socket.send(encode(&reply)).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}
