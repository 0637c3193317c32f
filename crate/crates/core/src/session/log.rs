//! Line-oriented session log.
//!
//! ```text
//! navis-session-log 1
//! duration_us = 10000000
//! encoder.pulses_per_revolution = 600
//! ...                                  (full SimConfig, canonical order)
//! ---
//! 0 ENC 0 0
//! 7850 POSE 0.000000 0.000000 0.000000
//! 157000 UART aa01...
//! 157000 CMD 0.5 12.25
//! 157000 TX 4e415653...
//! 157000 RX 4e415653...
//! 471000 FAILSAFE 12.25
//! 500000 INPUT 1 30 2
//! ```

use std::fmt::{self, Write as _};

use super::SessionError;
use crate::config::SimConfig;
use crate::kinematics::{ScooterPose, TimedPose};

pub const LOG_MAGIC: &str = "navis-session-log";
pub const LOG_VERSION: u32 = 1;
const HEADER_END: &str = "---";

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Cumulative treadmill ticks and handlebar angle.
    Encoder {
        tick_count: i64,
        angle_deg: f64,
    },
    Uart(Vec<u8>),
    /// Command produced by the MCU (before transport).
    Command {
        throttle: f64,
        steering_delta_deg: f64,
    },
    Tx(Vec<u8>),
    Rx(Vec<u8>),
    /// Receiver stop override with the held steering.
    Failsafe {
        steering_delta_deg: f64,
    },
    /// Live rider setpoint injected at the emulator.
    Input {
        rps: f64,
        handlebar_deg: f64,
        writer: u64,
    },
    /// Pose after a sim tick, as exported (six decimals, heading unnormalized
    /// by the text round trip).
    Pose {
        x: f64,
        y: f64,
        heading_deg: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t_us: u64,
    pub kind: EventKind,
}

impl Event {
    pub fn pose(tp: &TimedPose) -> Event {
        Event {
            t_us: tp.t_us,
            kind: EventKind::Pose {
                x: tp.pose.x,
                y: tp.pose.y,
                heading_deg: tp.pose.heading_deg(),
            },
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            EventKind::Encoder { .. } => "ENC",
            EventKind::Uart(_) => "UART",
            EventKind::Command { .. } => "CMD",
            EventKind::Tx(_) => "TX",
            EventKind::Rx(_) => "RX",
            EventKind::Failsafe { .. } => "FAILSAFE",
            EventKind::Input { .. } => "INPUT",
            EventKind::Pose { .. } => "POSE",
        }
    }

    fn parse(line: &str, line_no: usize) -> Result<Event, SessionError> {
        let corrupt = |message: String| SessionError::CorruptLog {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(corrupt(format!("truncated event {line:?}")));
        }
        let t_us: u64 = fields[0]
            .parse()
            .map_err(|_| corrupt(format!("bad timestamp {:?}", fields[0])))?;
        let args = &fields[2..];
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(corrupt(format!(
                    "{} expects {n} fields, found {}",
                    fields[1],
                    args.len()
                )))
            }
        };
        let num = |i: usize| -> Result<f64, SessionError> {
            args[i]
                .parse()
                .map_err(|_| corrupt(format!("bad number {:?}", args[i])))
        };
        let bytes = |i: usize| -> Result<Vec<u8>, SessionError> {
            hex::decode(args[i]).map_err(|_| corrupt(format!("bad hex {:?}", args[i])))
        };
        let kind = match fields[1] {
            "ENC" => {
                want(2)?;
                EventKind::Encoder {
                    tick_count: args[0]
                        .parse()
                        .map_err(|_| corrupt(format!("bad tick count {:?}", args[0])))?,
                    angle_deg: num(1)?,
                }
            }
            "UART" => {
                want(1)?;
                EventKind::Uart(bytes(0)?)
            }
            "CMD" => {
                want(2)?;
                EventKind::Command {
                    throttle: num(0)?,
                    steering_delta_deg: num(1)?,
                }
            }
            "TX" => {
                want(1)?;
                EventKind::Tx(bytes(0)?)
            }
            "RX" => {
                want(1)?;
                EventKind::Rx(bytes(0)?)
            }
            "FAILSAFE" => {
                want(1)?;
                EventKind::Failsafe {
                    steering_delta_deg: num(0)?,
                }
            }
            "INPUT" => {
                want(3)?;
                EventKind::Input {
                    rps: num(0)?,
                    handlebar_deg: num(1)?,
                    writer: args[2]
                        .parse()
                        .map_err(|_| corrupt(format!("bad writer {:?}", args[2])))?,
                }
            }
            "POSE" => {
                want(3)?;
                EventKind::Pose {
                    x: num(0)?,
                    y: num(1)?,
                    heading_deg: num(2)?,
                }
            }
            other => return Err(corrupt(format!("unknown event kind {other:?}"))),
        };
        Ok(Event { t_us, kind })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.t_us, self.tag())?;
        match &self.kind {
            EventKind::Encoder {
                tick_count,
                angle_deg,
            } => write!(f, " {tick_count} {angle_deg}"),
            EventKind::Uart(b) | EventKind::Tx(b) | EventKind::Rx(b) => {
                write!(f, " {}", hex::encode(b))
            }
            EventKind::Command {
                throttle,
                steering_delta_deg,
            } => write!(f, " {throttle} {steering_delta_deg}"),
            EventKind::Failsafe { steering_delta_deg } => write!(f, " {steering_delta_deg}"),
            EventKind::Input {
                rps,
                handlebar_deg,
                writer,
            } => write!(f, " {rps} {handlebar_deg} {writer}"),
            EventKind::Pose { x, y, heading_deg } => {
                write!(f, " {x:.6} {y:.6} {heading_deg:.6}")
            }
        }
    }
}

/// A recorded session: the configuration it ran under plus its event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub config: SimConfig,
    pub duration_us: u64,
    pub events: Vec<Event>,
}

impl SessionLog {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 + self.events.len() * 48);
        let _ = writeln!(out, "{LOG_MAGIC} {LOG_VERSION}");
        let _ = writeln!(out, "duration_us = {}", self.duration_us);
        out.push_str(&self.config.to_kv_string());
        let _ = writeln!(out, "{HEADER_END}");
        for ev in &self.events {
            let _ = writeln!(out, "{ev}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<SessionLog, SessionError> {
        let mut lines = text.lines().enumerate();
        let corrupt = |line: usize, message: &str| SessionError::CorruptLog {
            line,
            message: message.to_string(),
        };
        let (_, first) = lines.next().ok_or_else(|| corrupt(1, "empty log"))?;
        let version = match first.split_whitespace().collect::<Vec<_>>()[..] {
            [LOG_MAGIC, v] => v
                .parse::<u32>()
                .map_err(|_| corrupt(1, "bad format version"))?,
            _ => return Err(corrupt(1, "missing log magic")),
        };
        if version != LOG_VERSION {
            return Err(SessionError::VersionMismatch {
                found: version,
                supported: LOG_VERSION,
            });
        }

        let mut duration_us = None;
        let mut config_text = String::new();
        let mut header_closed = false;
        let mut config_first_line = 0;
        for (idx, line) in lines.by_ref() {
            let line_no = idx + 1;
            if line.trim() == HEADER_END {
                header_closed = true;
                break;
            }
            if let Some(v) = line.strip_prefix("duration_us = ") {
                duration_us = Some(
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| corrupt(line_no, "bad duration"))?,
                );
                continue;
            }
            if config_first_line == 0 {
                config_first_line = line_no;
            }
            config_text.push_str(line);
            config_text.push('\n');
        }
        if !header_closed {
            return Err(corrupt(text.lines().count(), "header not terminated"));
        }
        let duration_us = duration_us.ok_or_else(|| corrupt(2, "missing duration_us"))?;
        let config = SimConfig::parse(&config_text).map_err(|e| SessionError::CorruptLog {
            line: config_first_line,
            message: format!("config header: {e}"),
        })?;

        let mut events = Vec::new();
        let mut last_t = 0u64;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let ev = Event::parse(line, line_no)?;
            if ev.t_us < last_t {
                return Err(corrupt(
                    line_no,
                    &format!("timestamp {} precedes {}", ev.t_us, last_t),
                ));
            }
            last_t = ev.t_us;
            events.push(ev);
        }
        Ok(SessionLog {
            config,
            duration_us,
            events,
        })
    }

    pub fn count(&self, tag: &str) -> usize {
        self.events.iter().filter(|e| e.tag() == tag).count()
    }

    /// The POSE events as trajectory export lines.
    pub fn recorded_trajectory_lines(&self) -> Vec<String> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Pose { .. }))
            .map(|e| e.to_string().replacen(" POSE", "", 1))
            .collect()
    }

    pub fn recorded_poses(&self) -> Vec<TimedPose> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Pose { x, y, heading_deg } => Some(TimedPose {
                    t_us: e.t_us,
                    pose: ScooterPose::new(x, y, heading_deg),
                }),
                _ => None,
            })
            .collect()
    }
}
