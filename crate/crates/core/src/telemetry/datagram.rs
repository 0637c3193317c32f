//! MCU to world datagram.
//!
//! ```text
//! offset  size  field
//!      0     4  magic              "NAVS"
//!      4     1  version            1
//!      5     4  seq                u32
//!      9     8  t_us               u64, sender clock
//!     17     4  throttle           Q16.16
//!     21     4  steering_delta_deg Q16.16
//!     25     1  flags              bit0 = failsafe active
//!     26     2  crc                CRC-16/CCITT-FALSE over bytes 4..=25
//! ```
//! All multi-byte fields are little endian.

use serde::{Deserialize, Serialize};

use super::TelemetryError;
use crate::crc::crc16_ccitt_false;
use crate::fixed::Q16;
use crate::mcu::MotionCommand;

pub const DATAGRAM_MAGIC: [u8; 4] = *b"NAVS";
pub const DATAGRAM_VERSION: u8 = 1;
pub const DATAGRAM_LEN: usize = 28;
pub const FLAG_FAILSAFE: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryDatagram {
    pub seq: u32,
    pub t_us: u64,
    pub throttle: Q16,
    pub steering_delta_deg: Q16,
    pub flags: u8,
}

impl TelemetryDatagram {
    pub fn new(cmd: MotionCommand, seq: u32, t_us: u64, flags: u8) -> Result<Self, TelemetryError> {
        let out_of_range = || TelemetryError::RangeExceeded {
            throttle: cmd.throttle,
            steering_delta_deg: cmd.steering_delta_deg,
        };
        if !cmd.is_valid() {
            return Err(out_of_range());
        }
        Ok(TelemetryDatagram {
            seq,
            t_us,
            throttle: Q16::from_f64(cmd.throttle).ok_or_else(out_of_range)?,
            steering_delta_deg: Q16::from_f64(cmd.steering_delta_deg).ok_or_else(out_of_range)?,
            flags,
        })
    }

    pub fn command(&self) -> MotionCommand {
        MotionCommand {
            throttle: self.throttle.to_f64(),
            steering_delta_deg: self.steering_delta_deg.to_f64(),
        }
    }

    pub fn failsafe_active(&self) -> bool {
        self.flags & FLAG_FAILSAFE != 0
    }

    pub fn to_bytes(&self) -> [u8; DATAGRAM_LEN] {
        let mut out = [0u8; DATAGRAM_LEN];
        out[0..4].copy_from_slice(&DATAGRAM_MAGIC);
        out[4] = DATAGRAM_VERSION;
        out[5..9].copy_from_slice(&self.seq.to_le_bytes());
        out[9..17].copy_from_slice(&self.t_us.to_le_bytes());
        out[17..21].copy_from_slice(&self.throttle.to_le_bytes());
        out[21..25].copy_from_slice(&self.steering_delta_deg.to_le_bytes());
        out[25] = self.flags;
        let crc = crc16_ccitt_false(&out[4..26]);
        out[26..28].copy_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TelemetryError> {
        if bytes.len() < DATAGRAM_LEN {
            return Err(TelemetryError::ShortDatagram(bytes.len()));
        }
        if bytes.len() > DATAGRAM_LEN {
            return Err(TelemetryError::BadLength(bytes.len()));
        }
        if bytes[0..4] != DATAGRAM_MAGIC {
            return Err(TelemetryError::BadMagic([
                bytes[0], bytes[1], bytes[2], bytes[3],
            ]));
        }
        if bytes[4] != DATAGRAM_VERSION {
            return Err(TelemetryError::BadVersion(bytes[4]));
        }
        let computed = crc16_ccitt_false(&bytes[4..26]);
        let carried = u16::from_le_bytes([bytes[26], bytes[27]]);
        if computed != carried {
            return Err(TelemetryError::BadCrc { computed, carried });
        }
        let dg = TelemetryDatagram {
            seq: u32::from_le_bytes(bytes[5..9].try_into().unwrap()),
            t_us: u64::from_le_bytes(bytes[9..17].try_into().unwrap()),
            throttle: Q16::from_le_bytes(bytes[17..21].try_into().unwrap()),
            steering_delta_deg: Q16::from_le_bytes(bytes[21..25].try_into().unwrap()),
            flags: bytes[25],
        };
        let cmd = dg.command();
        if !cmd.is_valid() {
            return Err(TelemetryError::OutOfRange {
                throttle: cmd.throttle,
                steering_delta_deg: cmd.steering_delta_deg,
            });
        }
        Ok(dg)
    }
}

pub fn encode_datagram(
    cmd: MotionCommand,
    seq: u32,
    t_us: u64,
) -> Result<[u8; DATAGRAM_LEN], TelemetryError> {
    Ok(TelemetryDatagram::new(cmd, seq, t_us, 0)?.to_bytes())
}

pub fn decode_datagram(bytes: &[u8]) -> Result<TelemetryDatagram, TelemetryError> {
    TelemetryDatagram::from_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn crc_table_reference(data: &[u8]) -> u16 {
        let mut table = [0u16; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut v = (i as u16) << 8;
            for _ in 0..8 {
                v = if v & 0x8000 != 0 {
                    (v << 1) ^ 0x1021
                } else {
                    v << 1
                };
            }
            *slot = v;
        }
        data.iter().fold(0xFFFFu16, |crc, &b| {
            (crc << 8) ^ table[((crc >> 8) as u8 ^ b) as usize]
        })
    }

    #[test]
    fn zero_datagram_layout() {
        let bytes = encode_datagram(MotionCommand::STOP, 0, 0).unwrap();
        assert_eq!(&bytes[0..5], b"NAVS\x01");
        assert!(bytes[5..26].iter().all(|&b| b == 0));
        let crc = crc_table_reference(&bytes[4..26]);
        assert_eq!(crc, 0xF26C);
        assert_eq!(u16::from_le_bytes([bytes[26], bytes[27]]), crc);
    }

    #[test]
    fn exact_round_trip() {
        let cmd = MotionCommand::new(-0.25, 45.5).unwrap();
        let dg = decode_datagram(&encode_datagram(cmd, 9, 1_234_567).unwrap()).unwrap();
        assert_eq!(dg.command(), cmd);
        assert_eq!(dg.seq, 9);
        assert_eq!(dg.t_us, 1_234_567);
        assert!(!dg.failsafe_active());
    }

    #[test]
    fn rejects_invalid_command() {
        let cmd = MotionCommand {
            throttle: 1.5,
            steering_delta_deg: 0.0,
        };
        assert!(matches!(
            encode_datagram(cmd, 0, 0),
            Err(TelemetryError::RangeExceeded { .. })
        ));
    }

    #[test]
    fn rejects_in_range_crc_with_out_of_range_payload() {
        let mut bytes = encode_datagram(MotionCommand::STOP, 1, 0).unwrap();
        bytes[17..21].copy_from_slice(&Q16::from_f64(2.0).unwrap().to_le_bytes());
        let crc = crc16_ccitt_false(&bytes[4..26]);
        bytes[26..28].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode_datagram(&bytes),
            Err(TelemetryError::OutOfRange { .. })
        ));
    }

    #[test]
    fn single_byte_corruption() {
        let bytes = encode_datagram(MotionCommand::new(0.5, -12.0).unwrap(), 77, 999).unwrap();
        for pos in 0..DATAGRAM_LEN {
            for flip in [0x01u8, 0x80, 0xFF, 0x5A] {
                let mut c = bytes;
                c[pos] ^= flip;
                let err = decode_datagram(&c).unwrap_err();
                match pos {
                    0..=3 => assert!(matches!(err, TelemetryError::BadMagic(_))),
                    4 => assert!(matches!(err, TelemetryError::BadVersion(_))),
                    _ => assert!(matches!(err, TelemetryError::BadCrc { .. })),
                }
            }
        }
    }

    #[test]
    fn length_errors() {
        let bytes = encode_datagram(MotionCommand::STOP, 1, 0).unwrap();
        assert!(matches!(
            decode_datagram(&bytes[..27]),
            Err(TelemetryError::ShortDatagram(27))
        ));
        let mut long = bytes.to_vec();
        long.push(0);
        assert!(matches!(
            decode_datagram(&long),
            Err(TelemetryError::BadLength(29))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_quantized(t in -1.0f64..=1.0, s in -180.0f64..=180.0, seq: u32, ts: u64) {
            let cmd = MotionCommand::new(t, s).unwrap();
            let dg = decode_datagram(&encode_datagram(cmd, seq, ts).unwrap()).unwrap();
            prop_assert_eq!(dg.command().throttle, crate::fixed::quantize(t).unwrap());
            prop_assert_eq!(dg.command().steering_delta_deg, crate::fixed::quantize(s).unwrap());
            prop_assert_eq!((dg.seq, dg.t_us), (seq, ts));
        }

        #[test]
        fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            if let Ok(dg) = decode_datagram(&bytes) {
                prop_assert!(dg.command().is_valid());
                prop_assert_eq!(dg.to_bytes().to_vec(), bytes);
            }
        }
    }
}
