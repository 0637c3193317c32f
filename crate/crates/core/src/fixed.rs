//! Signed Q16.16 fixed point as carried on both wire formats.

use serde::{Deserialize, Serialize};

const SCALE: f64 = 65536.0;

/// A signed 32-bit value with 16 fractional bits.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Q16(pub i32);

impl Q16 {
    pub const RESOLUTION: f64 = 1.0 / SCALE;

    /// Round to the nearest representable value. Returns `None` when the value
    /// is not finite or lies outside the Q16.16 range.
    pub fn from_f64(value: f64) -> Option<Q16> {
        if !value.is_finite() {
            return None;
        }
        let raw = (value * SCALE).round();
        if raw < i32::MIN as f64 || raw > i32::MAX as f64 {
            return None;
        }
        Some(Q16(raw as i32))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    pub fn to_le_bytes(self) -> [u8; 4] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; 4]) -> Q16 {
        Q16(i32::from_le_bytes(bytes))
    }
}

/// Quantize a value to the nearest Q16.16 step, as a round trip through the
/// wire would.
pub fn quantize(value: f64) -> Option<f64> {
    Q16::from_f64(value).map(Q16::to_f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values_survive() {
        for v in [0.0, 1.5, -90.25, -0.25, 45.5, 1.0, -1.0, 180.0] {
            assert_eq!(Q16::from_f64(v).unwrap().to_f64(), v);
        }
    }

    #[test]
    fn range_limits() {
        assert!(Q16::from_f64(40000.0).is_none());
        assert!(Q16::from_f64(-32768.0).is_some());
        assert!(Q16::from_f64(32768.0).is_none());
        assert!(Q16::from_f64(f64::NAN).is_none());
        assert!(Q16::from_f64(f64::INFINITY).is_none());
    }

    #[test]
    fn rounds_to_nearest_step() {
        let v = 0.1;
        let q = quantize(v).unwrap();
        assert!((q - v).abs() <= Q16::RESOLUTION / 2.0);
    }
}
