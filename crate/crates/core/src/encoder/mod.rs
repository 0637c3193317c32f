//! Emulation and decoding of the two rig sensors: the incremental quadrature
//! encoder on the treadmill roller and the absolute encoder on the handlebar.

mod quadrature;
mod ride;

pub use quadrature::{quadrature_step, QuadratureDecoder, QuadraturePhase};
pub use ride::{emulate_ride, RideEmulator, RideProfile, SampleClock, Setpoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::normalize_deg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("invalid quadrature transition {from:?} -> {to:?} (both phases changed)")]
    InvalidTransition {
        from: QuadraturePhase,
        to: QuadraturePhase,
    },
    #[error("sample interval must be positive, got {0} s")]
    NonPositiveInterval(f64),
    #[error("ride profile setpoint {index} at t={t_us}us does not follow the previous one")]
    UnorderedProfile { index: usize, t_us: u64 },
    #[error("sample time {t_us}us is not after the previous sample")]
    NonIncreasingSample { t_us: u64 },
    #[error("ride script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = EncoderError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Quadrature counts per treadmill roller revolution.
    pub pulses_per_revolution: u32,
    /// Quantization step of the handlebar encoder.
    pub angle_resolution_deg: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            pulses_per_revolution: 600,
            angle_resolution_deg: 0.1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pulses_per_revolution == 0 {
            return Err(EncoderError::InvalidConfig(
                "pulses_per_revolution must be at least 1".into(),
            ));
        }
        let res = self.angle_resolution_deg;
        if !(res.is_finite() && res > 0.0) {
            return Err(EncoderError::InvalidConfig(format!(
                "angle_resolution_deg must be positive, got {res}"
            )));
        }
        let steps = 360.0 / res;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(EncoderError::InvalidConfig(format!(
                "angle_resolution_deg {res} does not divide 360"
            )));
        }
        Ok(())
    }
}

/// Cumulative treadmill count at an instant. Positive counts correspond to the
/// rider pushing the belt from the top towards the bottom of the treadmill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncrementalSample {
    pub tick_count: i64,
    /// Microseconds since session start.
    pub t_us: u64,
}

/// Handlebar angle, always normalized into `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct AbsoluteAngle(f64);

impl AbsoluteAngle {
    pub fn new(degrees: f64) -> AbsoluteAngle {
        AbsoluteAngle(normalize_deg(degrees))
    }

    /// Snap to the nearest multiple of `resolution_deg`, then normalize.
    pub fn quantized(degrees: f64, resolution_deg: f64) -> AbsoluteAngle {
        AbsoluteAngle::new((degrees / resolution_deg).round() * resolution_deg)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }
}

/// One reading of both sensors taken at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub incremental: IncrementalSample,
    pub angle: AbsoluteAngle,
}

impl SensorSample {
    pub fn t_us(&self) -> u64 {
        self.incremental.t_us
    }
}

/// Roller speed in revolutions per second from a tick delta over `dt_s`
/// seconds.
pub fn ticks_to_rps(delta_ticks: i64, config: &EncoderConfig, dt_s: f64) -> Result<f64> {
    if dt_s.is_nan() || dt_s <= 0.0 {
        return Err(EncoderError::NonPositiveInterval(dt_s));
    }
    Ok(delta_ticks as f64 / (config.pulses_per_revolution as f64 * dt_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(ppr: u32) -> EncoderConfig {
        EncoderConfig {
            pulses_per_revolution: ppr,
            ..EncoderConfig::default()
        }
    }

    #[test]
    fn one_revolution_per_second() {
        assert_eq!(ticks_to_rps(600, &cfg(600), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_ticks() {
        assert_eq!(ticks_to_rps(0, &cfg(600), 0.157).unwrap(), 0.0);
    }

    #[test]
    fn negative_half_turn_matches_single_tick_accumulation() {
        // reference: accumulate -300 single ticks as fractional revolutions
        let mut revs = 0.0f64;
        for _ in 0..300 {
            revs -= 1.0 / 600.0;
        }
        let reference = revs / 0.5;
        let got = ticks_to_rps(-300, &cfg(600), 0.5).unwrap();
        assert!((got - reference).abs() < 1e-12);
        assert_eq!(got, -1.0);
    }

    #[test]
    fn rejects_non_positive_interval() {
        assert!(matches!(
            ticks_to_rps(1, &cfg(600), 0.0),
            Err(EncoderError::NonPositiveInterval(_))
        ));
        assert!(ticks_to_rps(1, &cfg(600), -1.0).is_err());
        assert!(ticks_to_rps(1, &cfg(600), f64::NAN).is_err());
    }

    #[test]
    fn linear_in_ticks() {
        for d in [-1000i64, -7, 1, 13, 600, 12345] {
            let one = ticks_to_rps(d, &cfg(600), 0.157).unwrap();
            let two = ticks_to_rps(2 * d, &cfg(600), 0.157).unwrap();
            assert_eq!(two, 2.0 * one);
        }
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        assert!(cfg(0).validate().is_err());
        let bad = EncoderConfig {
            angle_resolution_deg: 0.7,
            ..EncoderConfig::default()
        };
        assert!(bad.validate().is_err());
        let neg = EncoderConfig {
            angle_resolution_deg: -1.0,
            ..EncoderConfig::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn angle_quantization_wraps() {
        assert_eq!(AbsoluteAngle::quantized(359.96, 0.1).degrees(), 0.0);
        assert_eq!(AbsoluteAngle::new(-30.0).degrees(), 330.0);
        let a = AbsoluteAngle::quantized(12.34, 0.1).degrees();
        assert!((a - 12.3).abs() < 1e-9);
    }
}
