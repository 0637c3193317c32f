//! Session configuration and its `key = value` text form.
//!
//! ```text
//! # comments start with '#'
//! encoder.pulses_per_revolution = 600
//! pipeline.throttle_gain = 0.5
//! kinematics.steering_mode = bicycle
//! transport = scripted
//! transport.loss_pct = 10
//! transport.seed = 7
//! mode = fast-forward
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::EncoderConfig;
use crate::kinematics::{KinematicParams, SteeringMode};
use crate::mcu::{PipelineConfig, STEERING_LIMIT_DEG};
use crate::telemetry::{TransportConfig, DEFAULT_UDP_PORT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RunMode {
    /// Paced against the wall clock.
    Realtime,
    /// Simulated clock only; bit-deterministic.
    #[default]
    FastForward,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Realtime => "realtime",
            RunMode::FastForward => "fast-forward",
        }
    }
}

/// Physical limits for live rider setpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputLimits {
    pub max_rps: f64,
    pub max_handlebar_deg: f64,
}

impl Default for InputLimits {
    fn default() -> Self {
        InputLimits {
            max_rps: 4.0,
            max_handlebar_deg: STEERING_LIMIT_DEG,
        }
    }
}

impl InputLimits {
    pub fn check(&self, rps: f64, handlebar_deg: f64) -> Result<(), String> {
        if !rps.is_finite() || rps.abs() > self.max_rps {
            return Err(format!(
                "rps_target {rps} outside [-{m}, {m}]",
                m = self.max_rps
            ));
        }
        if !handlebar_deg.is_finite() || handlebar_deg.abs() > self.max_handlebar_deg {
            return Err(format!(
                "handlebar_deg {handlebar_deg} outside [-{m}, {m}]",
                m = self.max_handlebar_deg
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub encoder: EncoderConfig,
    /// Sensor emulator sampling period.
    pub sample_period_us: u64,
    pub pipeline: PipelineConfig,
    pub kinematics: KinematicParams,
    pub transport: TransportConfig,
    /// Link silence before the receiver forces a stop. `None` means three
    /// control periods.
    pub failsafe_timeout_us: Option<u64>,
    pub mode: RunMode,
    pub limits: InputLimits,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            encoder: EncoderConfig::default(),
            sample_period_us: 10_000,
            pipeline: PipelineConfig::default(),
            kinematics: KinematicParams::default(),
            transport: TransportConfig::Loopback,
            failsafe_timeout_us: None,
            mode: RunMode::FastForward,
            limits: InputLimits::default(),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse {
        line,
        message: format!("invalid value {value:?} for {key}"),
    })
}

impl SimConfig {
    pub fn failsafe_timeout_us(&self) -> u64 {
        self.failsafe_timeout_us
            .unwrap_or(3 * self.pipeline.control_period_us)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.encoder.validate().map_err(|e| invalid(&e))?;
        self.pipeline.validate().map_err(|e| invalid(&e))?;
        self.kinematics
            .validate(self.pipeline.control_period_us)
            .map_err(|e| invalid(&e))?;
        self.transport.validate().map_err(|e| invalid(&e))?;
        if self.sample_period_us == 0 {
            return Err(ConfigError::Invalid(
                "sample_period_us must be positive".into(),
            ));
        }
        if self.failsafe_timeout_us() == 0 {
            return Err(ConfigError::Invalid(
                "failsafe timeout must be positive".into(),
            ));
        }
        if !(self.limits.max_rps > 0.0 && self.limits.max_handlebar_deg > 0.0) {
            return Err(ConfigError::Invalid("input limits must be positive".into()));
        }
        Ok(())
    }

    /// Parse `key = value` lines over the defaults. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        let mut transport_kind = String::from("loopback");
        let mut address = String::from("127.0.0.1");
        let mut port = DEFAULT_UDP_PORT;
        let (mut loss, mut reorder, mut duplicate) = (0.0, 0.0, 0.0);
        let mut seed: Option<u64> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("expected key = value, got {content:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "encoder.pulses_per_revolution" => {
                    cfg.encoder.pulses_per_revolution = parse_value(line, key, value)?
                }
                "encoder.angle_resolution_deg" => {
                    cfg.encoder.angle_resolution_deg = parse_value(line, key, value)?
                }
                "encoder.sample_period_us" => cfg.sample_period_us = parse_value(line, key, value)?,
                "pipeline.throttle_gain" => {
                    cfg.pipeline.throttle_gain = parse_value(line, key, value)?
                }
                "pipeline.reference_angle_deg" => {
                    cfg.pipeline.reference_angle_deg = parse_value(line, key, value)?
                }
                "pipeline.control_period_us" => {
                    cfg.pipeline.control_period_us = parse_value(line, key, value)?
                }
                "kinematics.v_max" => cfg.kinematics.v_max = parse_value(line, key, value)?,
                "kinematics.steering_mode" => {
                    cfg.kinematics.steering_mode = match value {
                        "direct-rate" => SteeringMode::DirectRate,
                        "bicycle" => SteeringMode::Bicycle,
                        _ => {
                            return Err(ConfigError::Parse {
                                line,
                                message: format!(
                                    "steering_mode must be direct-rate or bicycle, got {value:?}"
                                ),
                            })
                        }
                    }
                }
                "kinematics.yaw_gain" => cfg.kinematics.yaw_gain = parse_value(line, key, value)?,
                "kinematics.wheelbase" => cfg.kinematics.wheelbase = parse_value(line, key, value)?,
                "kinematics.sim_dt_us" => cfg.kinematics.sim_dt_us = parse_value(line, key, value)?,
                "telemetry.failsafe_timeout_us" => {
                    cfg.failsafe_timeout_us = Some(parse_value(line, key, value)?)
                }
                "transport" => match value {
                    "loopback" | "udp" | "scripted" => transport_kind = value.to_string(),
                    _ => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!(
                                "transport must be loopback, udp or scripted, got {value:?}"
                            ),
                        })
                    }
                },
                "transport.address" => address = value.to_string(),
                "transport.port" => port = parse_value(line, key, value)?,
                "transport.loss_pct" => loss = parse_value(line, key, value)?,
                "transport.reorder_pct" => reorder = parse_value(line, key, value)?,
                "transport.duplicate_pct" => duplicate = parse_value(line, key, value)?,
                "transport.seed" => seed = Some(parse_value(line, key, value)?),
                "limits.max_rps" => cfg.limits.max_rps = parse_value(line, key, value)?,
                "limits.max_handlebar_deg" => {
                    cfg.limits.max_handlebar_deg = parse_value(line, key, value)?
                }
                "mode" => {
                    cfg.mode = match value {
                        "realtime" => RunMode::Realtime,
                        "fast-forward" => RunMode::FastForward,
                        _ => {
                            return Err(ConfigError::Parse {
                                line,
                                message: format!(
                                    "mode must be realtime or fast-forward, got {value:?}"
                                ),
                            })
                        }
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        cfg.transport = match transport_kind.as_str() {
            "udp" => TransportConfig::Udp { address, port },
            "scripted" => TransportConfig::Scripted {
                loss_pct: loss,
                reorder_pct: reorder,
                duplicate_pct: duplicate,
                seed,
            },
            _ => TransportConfig::Loopback,
        };
        Ok(cfg)
    }

    /// Canonical text form: every key, fixed order, shortest round-trip floats.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv(
            "encoder.pulses_per_revolution",
            &self.encoder.pulses_per_revolution,
        );
        kv(
            "encoder.angle_resolution_deg",
            &self.encoder.angle_resolution_deg,
        );
        kv("encoder.sample_period_us", &self.sample_period_us);
        kv("pipeline.throttle_gain", &self.pipeline.throttle_gain);
        kv(
            "pipeline.reference_angle_deg",
            &self.pipeline.reference_angle_deg,
        );
        kv(
            "pipeline.control_period_us",
            &self.pipeline.control_period_us,
        );
        kv("kinematics.v_max", &self.kinematics.v_max);
        kv(
            "kinematics.steering_mode",
            &match self.kinematics.steering_mode {
                SteeringMode::DirectRate => "direct-rate",
                SteeringMode::Bicycle => "bicycle",
            },
        );
        kv("kinematics.yaw_gain", &self.kinematics.yaw_gain);
        kv("kinematics.wheelbase", &self.kinematics.wheelbase);
        kv("kinematics.sim_dt_us", &self.kinematics.sim_dt_us);
        kv("telemetry.failsafe_timeout_us", &self.failsafe_timeout_us());
        match &self.transport {
            TransportConfig::Loopback => kv("transport", &self.transport.kind()),
            TransportConfig::Udp { address, port } => {
                kv("transport", &"udp");
                kv("transport.address", address);
                kv("transport.port", port);
            }
            TransportConfig::Scripted {
                loss_pct,
                reorder_pct,
                duplicate_pct,
                seed,
            } => {
                kv("transport", &"scripted");
                kv("transport.loss_pct", loss_pct);
                kv("transport.reorder_pct", reorder_pct);
                kv("transport.duplicate_pct", duplicate_pct);
                if let Some(s) = seed {
                    kv("transport.seed", s);
                }
            }
        }
        kv("limits.max_rps", &self.limits.max_rps);
        kv("limits.max_handlebar_deg", &self.limits.max_handlebar_deg);
        kv("mode", &self.mode.as_str());
        out
    }
}
