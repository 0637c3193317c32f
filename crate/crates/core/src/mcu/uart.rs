//! Sensor-board to MCU serial frame.
//!
//! ```text
//! offset  size  field
//!      0     1  sync          0xAA
//!      1     1  version       0x01
//!      2     4  treadmill_rps Q16.16, little endian
//!      6     4  handlebar_deg Q16.16, little endian
//!     10     2  sample_seq    u16, little endian
//!     12     2  crc           CRC-16/CCITT-FALSE over bytes 1..=11, little endian
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crc::crc16_ccitt_false;
use crate::fixed::Q16;

pub const UART_SYNC: u8 = 0xAA;
pub const UART_VERSION: u8 = 0x01;
pub const UART_FRAME_LEN: usize = 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UartError {
    #[error("bad sync byte 0x{0:02X}")]
    BadSync(u8),
    #[error("unsupported frame version 0x{0:02X}")]
    BadVersion(u8),
    #[error("frame too short: {0} bytes")]
    ShortFrame(usize),
    #[error("frame too long: {0} bytes")]
    BadLength(usize),
    #[error("crc mismatch: computed 0x{computed:04X}, frame carries 0x{carried:04X}")]
    BadCrc { computed: u16, carried: u16 },
    #[error("{field} value {value} does not fit Q16.16")]
    RangeExceeded { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UartFrame {
    pub treadmill_rps: Q16,
    pub handlebar_deg: Q16,
    pub sample_seq: u16,
}

impl UartFrame {
    pub fn new(rps: f64, deg: f64, sample_seq: u16) -> Result<Self, UartError> {
        let treadmill_rps = Q16::from_f64(rps).ok_or(UartError::RangeExceeded {
            field: "treadmill_rps",
            value: rps,
        })?;
        let handlebar_deg = Q16::from_f64(deg).ok_or(UartError::RangeExceeded {
            field: "handlebar_deg",
            value: deg,
        })?;
        Ok(UartFrame {
            treadmill_rps,
            handlebar_deg,
            sample_seq,
        })
    }

    pub fn to_bytes(&self) -> [u8; UART_FRAME_LEN] {
        let mut out = [0u8; UART_FRAME_LEN];
        out[0] = UART_SYNC;
        out[1] = UART_VERSION;
        out[2..6].copy_from_slice(&self.treadmill_rps.to_le_bytes());
        out[6..10].copy_from_slice(&self.handlebar_deg.to_le_bytes());
        out[10..12].copy_from_slice(&self.sample_seq.to_le_bytes());
        let crc = crc16_ccitt_false(&out[1..12]);
        out[12..14].copy_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, UartError> {
        if bytes.len() < UART_FRAME_LEN {
            return Err(UartError::ShortFrame(bytes.len()));
        }
        if bytes.len() > UART_FRAME_LEN {
            return Err(UartError::BadLength(bytes.len()));
        }
        if bytes[0] != UART_SYNC {
            return Err(UartError::BadSync(bytes[0]));
        }
        if bytes[1] != UART_VERSION {
            return Err(UartError::BadVersion(bytes[1]));
        }
        let computed = crc16_ccitt_false(&bytes[1..12]);
        let carried = u16::from_le_bytes([bytes[12], bytes[13]]);
        if computed != carried {
            return Err(UartError::BadCrc { computed, carried });
        }
        Ok(UartFrame {
            treadmill_rps: Q16::from_le_bytes(bytes[2..6].try_into().unwrap()),
            handlebar_deg: Q16::from_le_bytes(bytes[6..10].try_into().unwrap()),
            sample_seq: u16::from_le_bytes([bytes[10], bytes[11]]),
        })
    }

    pub fn rps(&self) -> f64 {
        self.treadmill_rps.to_f64()
    }

    pub fn deg(&self) -> f64 {
        self.handlebar_deg.to_f64()
    }
}

pub fn encode_uart_frame(rps: f64, deg: f64, seq: u16) -> Result<[u8; UART_FRAME_LEN], UartError> {
    Ok(UartFrame::new(rps, deg, seq)?.to_bytes())
}

/// Decode one complete frame into `(rps, deg, seq)`.
pub fn decode_uart_frame(bytes: &[u8]) -> Result<(f64, f64, u16), UartError> {
    let f = UartFrame::from_bytes(bytes)?;
    Ok((f.rps(), f.deg(), f.sample_seq))
}

/// Byte-at-a-time deframer for a raw serial stream. Hunts for the sync byte,
/// drops candidate frames that fail validation and resynchronizes on the next
/// sync byte inside the rejected window.
#[derive(Debug, Default)]
pub struct UartStreamDecoder {
    buf: Vec<u8>,
    rejected: u64,
}

impl UartStreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, byte: u8) -> Option<UartFrame> {
        if self.buf.is_empty() && byte != UART_SYNC {
            return None;
        }
        self.buf.push(byte);
        if self.buf.len() < UART_FRAME_LEN {
            return None;
        }
        match UartFrame::from_bytes(&self.buf) {
            Ok(frame) => {
                self.buf.clear();
                Some(frame)
            }
            Err(_) => {
                self.rejected += 1;
                let next = self.buf[1..].iter().position(|&b| b == UART_SYNC);
                match next {
                    Some(i) => {
                        self.buf.drain(..=i);
                    }
                    None => self.buf.clear(),
                }
                None
            }
        }
    }

    pub fn extend(&mut self, bytes: &[u8]) -> Vec<UartFrame> {
        bytes.iter().filter_map(|&b| self.push(b)).collect()
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }
}
