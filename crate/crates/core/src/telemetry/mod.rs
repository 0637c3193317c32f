//! MotionCommand transport from the MCU to the world over an unreliable
//! datagram link.

mod capture;
mod datagram;
mod receiver;
mod transport;

pub use capture::{CaptureRecord, Direction};
pub use datagram::{
    decode_datagram, encode_datagram, TelemetryDatagram, DATAGRAM_LEN, DATAGRAM_MAGIC,
    DATAGRAM_VERSION, FLAG_FAILSAFE,
};
pub use receiver::{LinkCounters, ReceiverState};
pub use transport::{
    Delivery, LoopbackTransport, ScriptedTransport, Transport, TransportConfig, TransportStats,
    UdpTransport,
};

use thiserror::Error;

pub const DEFAULT_UDP_PORT: u16 = 47157;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("datagram too short: {0} bytes")]
    ShortDatagram(usize),
    #[error("datagram too long: {0} bytes")]
    BadLength(usize),
    #[error("bad magic {0:02X?}")]
    BadMagic([u8; 4]),
    #[error("unsupported datagram version {0}")]
    BadVersion(u8),
    #[error("crc mismatch: computed 0x{computed:04X}, datagram carries 0x{carried:04X}")]
    BadCrc { computed: u16, carried: u16 },
    #[error("payload out of range: throttle={throttle}, steering={steering_delta_deg}")]
    OutOfRange {
        throttle: f64,
        steering_delta_deg: f64,
    },
    #[error("command violates range limits: throttle={throttle}, steering={steering_delta_deg}")]
    RangeExceeded {
        throttle: f64,
        steering_delta_deg: f64,
    },
    #[error("invalid transport config: {0}")]
    InvalidTransport(String),
    #[error("malformed capture line {0:?}")]
    BadCapture(String),
    #[error("link i/o: {0}")]
    Io(#[from] std::io::Error),
}
