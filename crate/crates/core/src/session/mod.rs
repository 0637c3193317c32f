//! Headless session engine: emulator, MCU, link and world on one timeline.

mod live;
mod log;
mod replay;
mod world;

pub use live::{LiveHandle, LiveInput, LiveSession, StateSnapshot};
pub use log::{Event, EventKind, SessionLog, LOG_MAGIC, LOG_VERSION};
pub use replay::{replay, verify_replay, ReplayCheck};
pub use world::World;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::{ConfigError, RunMode, SimConfig};
use crate::encoder::{AbsoluteAngle, EncoderError, RideEmulator, RideProfile, SensorSample};
use crate::kinematics::{KinematicParams, KinematicsError};
use crate::mcu::{
    decode_uart_frame, encode_uart_frame, Mcu, MotionCommand, PipelineError, SensorReading,
};
use crate::telemetry::{
    LinkCounters, TelemetryDatagram, TelemetryError, Transport, TransportStats, FLAG_FAILSAFE,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("encoder: {0}")]
    Encoder(#[from] EncoderError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("telemetry: {0}")]
    Telemetry(#[from] TelemetryError),
    #[error("kinematics: {0}")]
    Kinematics(#[from] KinematicsError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("session duration must be positive")]
    InvalidDuration,
    #[error("log format version {found} not supported (expected {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("replay refused: log was recorded with {recorded:?}, requested {requested:?}")]
    RefusedConfigMismatch {
        recorded: Box<KinematicParams>,
        requested: Box<KinematicParams>,
    },
}

impl From<crate::mcu::UartError> for SessionError {
    fn from(e: crate::mcu::UartError) -> Self {
        SessionError::Pipeline(e.into())
    }
}

/// Tallies kept by the engine alongside the log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionCounters {
    pub samples: u64,
    pub uart_frames: u64,
    pub commands: u64,
    pub datagrams_sent: u64,
    pub setpoints: u64,
}

/// One running session. Drive it with [`Session::control_tick`] and close it
/// with [`Session::finish`].
pub struct Session {
    config: SimConfig,
    emulator: RideEmulator,
    next_sample_us: u64,
    window: Vec<SensorSample>,
    mcu: Mcu,
    uart_seq: u16,
    tx_seq: u32,
    transport: Box<dyn Transport>,
    world: World,
    ticks: u64,
    last_mcu_command: MotionCommand,
    last_writer: Option<u64>,
    counters: SessionCounters,
    recording: Option<Vec<Event>>,
}

impl Session {
    pub fn new(config: SimConfig, profile: RideProfile) -> Result<Self, SessionError> {
        config.validate()?;
        let transport = config.transport.build()?;
        Ok(Session {
            emulator: RideEmulator::new(profile, config.encoder)?,
            next_sample_us: 0,
            window: Vec::new(),
            mcu: Mcu::new(config.pipeline, config.encoder),
            uart_seq: 0,
            tx_seq: 0,
            transport,
            world: World::new(&config),
            ticks: 0,
            last_mcu_command: MotionCommand::STOP,
            last_writer: None,
            counters: SessionCounters::default(),
            recording: Some(Vec::new()),
            config,
        })
    }

    /// Stop keeping events in memory (long live sessions).
    pub fn without_recording(mut self) -> Self {
        self.recording = None;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Time of the most recent control tick.
    pub fn now_us(&self) -> u64 {
        self.ticks * self.config.pipeline.control_period_us
    }

    pub fn counters(&self) -> SessionCounters {
        self.counters
    }

    pub fn link(&self) -> LinkCounters {
        self.world.receiver().counters
    }

    pub fn transport_stats(&self) -> TransportStats {
        self.transport.stats()
    }

    pub fn last_mcu_command(&self) -> MotionCommand {
        self.last_mcu_command
    }

    pub fn last_writer(&self) -> Option<u64> {
        self.last_writer
    }

    fn record(&mut self, mut batch: Vec<Event>) {
        if let Some(rec) = self.recording.as_mut() {
            batch.sort_by_key(|e| e.t_us);
            rec.append(&mut batch);
        }
    }

    fn sample_until(&mut self, t_us: u64, batch: &mut Vec<Event>) -> Result<(), SessionError> {
        while self.next_sample_us <= t_us {
            let s = self.emulator.sample_at(self.next_sample_us)?;
            self.counters.samples += 1;
            batch.push(Event {
                t_us: s.t_us(),
                kind: EventKind::Encoder {
                    tick_count: s.incremental.tick_count,
                    angle_deg: s.angle.degrees(),
                },
            });
            self.window.push(s);
            self.next_sample_us += self.config.sample_period_us;
        }
        Ok(())
    }

    /// Advance one control period: sample the sensors, run the MCU, ship the
    /// command and integrate the world up to the new tick.
    pub fn control_tick(&mut self) -> Result<MotionCommand, SessionError> {
        let t = (self.ticks + 1) * self.config.pipeline.control_period_us;
        let mut batch = Vec::new();
        self.sample_until(t, &mut batch)?;
        self.world.advance_to(t, &mut |e| batch.push(e))?;

        let reading = self.mcu.sense(&self.window);
        self.window.clear();
        let (cmd, flags) = match reading {
            Some(r) => {
                let frame = encode_uart_frame(r.rps, r.handlebar.degrees(), self.uart_seq)?;
                self.uart_seq = self.uart_seq.wrapping_add(1);
                self.counters.uart_frames += 1;
                batch.push(Event {
                    t_us: t,
                    kind: EventKind::Uart(frame.to_vec()),
                });
                let (rps, deg, _) = decode_uart_frame(&frame)?;
                let cmd = self.mcu.apply(Some(SensorReading {
                    rps,
                    handlebar: AbsoluteAngle::new(deg),
                }));
                (cmd, 0)
            }
            // sensor silence: the MCU's hold policy, flagged on the wire
            None => (self.mcu.apply(None), FLAG_FAILSAFE),
        };
        self.ticks += 1;
        self.last_mcu_command = cmd;
        self.counters.commands += 1;
        batch.push(Event {
            t_us: t,
            kind: EventKind::Command {
                throttle: cmd.throttle,
                steering_delta_deg: cmd.steering_delta_deg,
            },
        });

        self.tx_seq += 1;
        let datagram = TelemetryDatagram::new(cmd, self.tx_seq, t, flags)?.to_bytes();
        self.transport
            .send(&datagram, t)
            .map_err(TelemetryError::from)?;
        self.counters.datagrams_sent += 1;
        batch.push(Event {
            t_us: t,
            kind: EventKind::Tx(datagram.to_vec()),
        });
        for d in self.transport.deliver(t).map_err(TelemetryError::from)? {
            self.world.on_datagram(&d.bytes, d.arrival_t_us);
            batch.push(Event {
                t_us: d.arrival_t_us,
                kind: EventKind::Rx(d.bytes),
            });
        }
        self.record(batch);
        Ok(cmd)
    }

    /// Feed a rider setpoint to the emulator exactly as a script line would,
    /// effective at the next sensor sample.
    pub fn inject_setpoint(
        &mut self,
        rps: f64,
        handlebar_deg: f64,
        writer: u64,
    ) -> Result<(), String> {
        self.config.limits.check(rps, handlebar_deg)?;
        let at = self.next_sample_us;
        self.emulator
            .inject(at, rps, handlebar_deg)
            .map_err(|e| e.to_string())?;
        self.last_writer = Some(writer);
        self.counters.setpoints += 1;
        let now = self.now_us();
        self.record(vec![Event {
            t_us: now,
            kind: EventKind::Input {
                rps,
                handlebar_deg,
                writer,
            },
        }]);
        Ok(())
    }

    /// Sample and integrate the tail between the last control tick and
    /// `end_us`.
    pub fn finish(&mut self, end_us: u64) -> Result<(), SessionError> {
        let mut batch = Vec::new();
        self.sample_until(end_us, &mut batch)?;
        self.world.advance_to(end_us, &mut |e| batch.push(e))?;
        self.record(batch);
        Ok(())
    }

    pub fn into_log(self, duration_us: u64) -> SessionLog {
        SessionLog {
            config: self.config,
            duration_us,
            events: self.recording.unwrap_or_default(),
        }
    }
}

/// Run a complete session over `duration_us` of simulated time. Fast-forward
/// mode never sleeps; realtime mode paces control ticks on the wall clock.
pub fn run_session(
    config: SimConfig,
    profile: RideProfile,
    duration_us: u64,
) -> Result<SessionLog, SessionError> {
    if duration_us == 0 {
        return Err(SessionError::InvalidDuration);
    }
    let realtime = config.mode == RunMode::Realtime;
    let period = config.pipeline.control_period_us;
    let mut session = Session::new(config, profile)?;
    let started = Instant::now();
    for k in 1..=duration_us / period {
        if realtime {
            let due = started + Duration::from_micros(k * period);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        session.control_tick()?;
    }
    session.finish(duration_us)?;
    Ok(session.into_log(duration_us))
}
