//! Packet capture lines: `t_us DIR hex(payload)`, DIR one of `TX` / `RX`.

use std::fmt;
use std::str::FromStr;

use super::TelemetryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Tx,
    Rx,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Tx => "TX",
            Direction::Rx => "RX",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub t_us: u64,
    pub direction: Direction,
    pub payload: Vec<u8>,
}

impl fmt::Display for CaptureRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.t_us,
            self.direction,
            hex::encode(&self.payload)
        )
    }
}

impl FromStr for CaptureRecord {
    type Err = TelemetryError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = || TelemetryError::BadCapture(line.to_string());
        let mut parts = line.split_whitespace();
        let t_us = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let direction = match parts.next() {
            Some("TX") => Direction::Tx,
            Some("RX") => Direction::Rx,
            _ => return Err(bad()),
        };
        let payload = parts
            .next()
            .and_then(|s| hex::decode(s).ok())
            .ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(CaptureRecord {
            t_us,
            direction,
            payload,
        })
    }
}
