//! The microcontroller stage: turns sensor readings into normalized motion
//! commands once per control period.

mod uart;

pub use uart::{
    decode_uart_frame, encode_uart_frame, UartError, UartFrame, UartStreamDecoder, UART_FRAME_LEN,
    UART_SYNC, UART_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap_signed_deg;
use crate::encoder::{ticks_to_rps, AbsoluteAngle, EncoderConfig, IncrementalSample, SensorSample};

/// Control period between two motion commands.
pub const DEFAULT_CONTROL_PERIOD_US: u64 = 157_000;

pub const THROTTLE_LIMIT: f64 = 1.0;
pub const STEERING_LIMIT_DEG: f64 = 180.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("non-finite input {0}")]
    NonFiniteInput(f64),
    #[error("motion command out of range: throttle={throttle}, steering={steering_delta_deg}")]
    RangeExceeded {
        throttle: f64,
        steering_delta_deg: f64,
    },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Uart(#[from] UartError),
}

/// Normalized rider intent. Throttle in `[-1, 1]` (positive = forward),
/// steering delta in `[-180, 180]` degrees (positive = right).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionCommand {
    pub throttle: f64,
    pub steering_delta_deg: f64,
}

impl MotionCommand {
    pub const STOP: MotionCommand = MotionCommand {
        throttle: 0.0,
        steering_delta_deg: 0.0,
    };

    pub fn new(throttle: f64, steering_delta_deg: f64) -> Result<Self, PipelineError> {
        let cmd = MotionCommand {
            throttle,
            steering_delta_deg,
        };
        if cmd.is_valid() {
            Ok(cmd)
        } else {
            Err(PipelineError::RangeExceeded {
                throttle,
                steering_delta_deg,
            })
        }
    }

    pub fn is_valid(&self) -> bool {
        (-THROTTLE_LIMIT..=THROTTLE_LIMIT).contains(&self.throttle)
            && (-STEERING_LIMIT_DEG..=STEERING_LIMIT_DEG).contains(&self.steering_delta_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Throttle per rev/s of roller speed.
    pub throttle_gain: f64,
    /// Handlebar angle that counts as straight ahead.
    pub reference_angle_deg: f64,
    pub control_period_us: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            throttle_gain: 0.5,
            reference_angle_deg: 0.0,
            control_period_us: DEFAULT_CONTROL_PERIOD_US,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.throttle_gain.is_finite() && self.throttle_gain > 0.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "throttle_gain must be positive, got {}",
                self.throttle_gain
            )));
        }
        if !(0.0..360.0).contains(&self.reference_angle_deg) {
            return Err(PipelineError::InvalidConfig(format!(
                "reference_angle_deg must lie in [0, 360), got {}",
                self.reference_angle_deg
            )));
        }
        if self.control_period_us == 0 {
            return Err(PipelineError::InvalidConfig(
                "control_period_us must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Clamped linear map from roller speed to throttle.
pub fn throttle_map(rps: f64, config: &PipelineConfig) -> Result<f64, PipelineError> {
    if !rps.is_finite() {
        return Err(PipelineError::NonFiniteInput(rps));
    }
    Ok((config.throttle_gain * rps).clamp(-THROTTLE_LIMIT, THROTTLE_LIMIT))
}

/// Signed handlebar deflection from the calibrated reference, wrapped into
/// `(-180, 180]` and clamped to `[-180, 180]`.
pub fn steering_delta(current: AbsoluteAngle, config: &PipelineConfig) -> f64 {
    wrap_signed_deg(current.degrees() - config.reference_angle_deg)
        .clamp(-STEERING_LIMIT_DEG, STEERING_LIMIT_DEG)
}

/// Number of commands emitted over `duration_us` of simulated time.
pub fn commands_in(duration_us: u64, control_period_us: u64) -> u64 {
    duration_us / control_period_us
}

/// What the sensor board measured over one control window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub rps: f64,
    pub handlebar: AbsoluteAngle,
}

/// Stateful MCU: remembers the last incremental sample (rate baseline) and the
/// last steering delta (held across empty windows).
#[derive(Debug, Clone)]
pub struct Mcu {
    pipeline: PipelineConfig,
    encoder: EncoderConfig,
    baseline: Option<IncrementalSample>,
    last_steering_deg: f64,
}

impl Mcu {
    pub fn new(pipeline: PipelineConfig, encoder: EncoderConfig) -> Self {
        Mcu {
            pipeline,
            encoder,
            baseline: None,
            last_steering_deg: 0.0,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.pipeline
    }

    /// Reduce the samples of one control window to a reading. Roller speed is
    /// measured from the last sample of the previous window (or the first
    /// sample of this one) to the last sample of this window. Returns `None`
    /// for an empty window.
    pub fn sense(&mut self, window: &[SensorSample]) -> Option<SensorReading> {
        let last = window.last()?;
        let base = self.baseline.unwrap_or(window[0].incremental);
        let dt_s = (last.t_us().saturating_sub(base.t_us)) as f64 / 1e6;
        let rps = ticks_to_rps(
            last.incremental.tick_count - base.tick_count,
            &self.encoder,
            dt_s,
        )
        .unwrap_or(0.0);
        self.baseline = Some(last.incremental);
        Some(SensorReading {
            rps,
            handlebar: last.angle,
        })
    }

    /// Map a reading to a command; `None` means no samples arrived, which
    /// yields zero throttle with the steering held.
    pub fn apply(&mut self, reading: Option<SensorReading>) -> MotionCommand {
        match reading {
            Some(r) => {
                let throttle = throttle_map(r.rps, &self.pipeline).unwrap_or(0.0);
                self.last_steering_deg = steering_delta(r.handlebar, &self.pipeline);
                MotionCommand {
                    throttle,
                    steering_delta_deg: self.last_steering_deg,
                }
            }
            None => MotionCommand {
                throttle: 0.0,
                steering_delta_deg: self.last_steering_deg,
            },
        }
    }

    pub fn control_tick(&mut self, window: &[SensorSample]) -> MotionCommand {
        let reading = self.sense(window);
        self.apply(reading)
    }
}
