//! Wall-clock session on its own thread, reachable through a command queue.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Session, SessionError};
use crate::config::{InputLimits, SimConfig};
use crate::encoder::RideProfile;
use crate::kinematics::ScooterPose;
use crate::mcu::MotionCommand;
use crate::telemetry::LinkCounters;

/// Immutable copy of the session state handed to observers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub t_us: u64,
    pub pose: ScooterPose,
    /// Command currently applied by the world.
    pub cmd: MotionCommand,
    pub link: LinkCounters,
    pub failsafe_active: bool,
    pub last_latency_us: Option<i64>,
    pub commands: u64,
    pub datagrams_sent: u64,
    /// Writer id of the most recent accepted setpoint.
    pub writer: Option<u64>,
}

impl StateSnapshot {
    pub fn of(session: &Session) -> Self {
        let world = session.world();
        StateSnapshot {
            t_us: session.now_us(),
            pose: world.pose(),
            cmd: world.command(),
            link: world.receiver().counters,
            failsafe_active: world.receiver().failsafe_active(),
            last_latency_us: world.receiver().last_latency_us,
            commands: session.counters().commands,
            datagrams_sent: session.counters().datagrams_sent,
            writer: session.last_writer(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LiveInput {
    Setpoint {
        writer: u64,
        rps: f64,
        handlebar_deg: f64,
    },
    Stop,
}

/// Cloneable access to a running [`LiveSession`].
#[derive(Debug, Clone)]
pub struct LiveHandle {
    inputs: Sender<LiveInput>,
    snapshot: Arc<RwLock<StateSnapshot>>,
    limits: InputLimits,
}

impl LiveHandle {
    pub fn snapshot(&self) -> StateSnapshot {
        *self.snapshot.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn limits(&self) -> InputLimits {
        self.limits
    }

    /// Queue a rider setpoint. Out-of-limit values are refused here and never
    /// reach the session.
    pub fn submit(&self, writer: u64, rps: f64, handlebar_deg: f64) -> Result<(), String> {
        self.limits.check(rps, handlebar_deg)?;
        self.inputs
            .send(LiveInput::Setpoint {
                writer,
                rps,
                handlebar_deg,
            })
            .map_err(|_| "session has ended".to_string())
    }

    pub fn stop(&self) {
        let _ = self.inputs.send(LiveInput::Stop);
    }
}

pub struct LiveSession {
    handle: LiveHandle,
    thread: JoinHandle<Result<StateSnapshot, SessionError>>,
}

impl LiveSession {
    /// Start a realtime session. It runs until `duration_us` elapses (if
    /// given), [`LiveHandle::stop`] is called, or every handle is dropped.
    pub fn spawn(
        config: SimConfig,
        profile: RideProfile,
        duration_us: Option<u64>,
    ) -> Result<LiveSession, SessionError> {
        let limits = config.limits;
        let period = config.pipeline.control_period_us;
        let session = Session::new(config, profile)?.without_recording();
        let snapshot = Arc::new(RwLock::new(StateSnapshot::of(&session)));
        let (tx, rx) = mpsc::channel();
        let shared = Arc::clone(&snapshot);
        let thread = thread::Builder::new()
            .name("navis-session".into())
            .spawn(move || run_live(session, rx, shared, period, duration_us))
            .expect("spawn session thread");
        Ok(LiveSession {
            handle: LiveHandle {
                inputs: tx,
                snapshot,
                limits,
            },
            thread,
        })
    }

    pub fn handle(&self) -> LiveHandle {
        self.handle.clone()
    }

    /// Stop the session and wait for its final snapshot.
    pub fn shutdown(self) -> Result<StateSnapshot, SessionError> {
        self.handle.stop();
        self.join()
    }

    /// Wait for the session to end on its own. Blocks forever for an
    /// unbounded session that nobody stops.
    pub fn join(self) -> Result<StateSnapshot, SessionError> {
        let LiveSession { handle, thread } = self;
        let out = thread.join().expect("session thread panicked");
        drop(handle);
        out
    }
}

fn run_live(
    mut session: Session,
    inputs: Receiver<LiveInput>,
    snapshot: Arc<RwLock<StateSnapshot>>,
    period_us: u64,
    duration_us: Option<u64>,
) -> Result<StateSnapshot, SessionError> {
    let started = Instant::now();
    let mut k = 0u64;
    loop {
        let next_t = (k + 1) * period_us;
        if duration_us.is_some_and(|d| next_t > d) {
            break;
        }
        let due = started + Duration::from_micros(next_t);
        // drain the queue until the next tick is due
        loop {
            let wait = due.saturating_duration_since(Instant::now());
            match inputs.recv_timeout(wait) {
                Ok(LiveInput::Setpoint {
                    writer,
                    rps,
                    handlebar_deg,
                }) => {
                    // limits were checked by the handle; a refusal here only
                    // happens if the config changed underneath
                    let _ = session.inject_setpoint(rps, handlebar_deg, writer);
                }
                Ok(LiveInput::Stop) | Err(RecvTimeoutError::Disconnected) => {
                    return Ok(StateSnapshot::of(&session));
                }
                Err(RecvTimeoutError::Timeout) => break,
            }
        }
        session.control_tick()?;
        k += 1;
        let snap = StateSnapshot::of(&session);
        *snapshot.write().unwrap_or_else(|e| e.into_inner()) = snap;
    }
    Ok(StateSnapshot::of(&session))
}
