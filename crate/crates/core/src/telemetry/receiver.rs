use serde::{Deserialize, Serialize};

use super::datagram::decode_datagram;
use crate::mcu::MotionCommand;

/// Per-link counters. `applied + stale_dropped + corrupt_dropped == received`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkCounters {
    pub received: u64,
    pub applied: u64,
    pub stale_dropped: u64,
    pub corrupt_dropped: u64,
}

impl LinkCounters {
    pub fn is_conserved(&self) -> bool {
        self.applied + self.stale_dropped + self.corrupt_dropped == self.received
    }
}

/// Latest-seq-wins receiver with a silence failsafe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReceiverState {
    pub last_applied_seq: Option<u32>,
    pub last_command: Option<MotionCommand>,
    /// Arrival time of the last applied datagram (0 before any).
    pub last_arrival_t_us: u64,
    pub counters: LinkCounters,
    /// Arrival time minus sender timestamp of the last applied datagram.
    pub last_latency_us: Option<i64>,
    failsafe_latched: bool,
    failsafe_overrides: u64,
}

impl ReceiverState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process one datagram. Returns the command when it was applied.
    pub fn receive(&mut self, bytes: &[u8], arrival_t_us: u64) -> Option<MotionCommand> {
        self.counters.received += 1;
        let dg = match decode_datagram(bytes) {
            Ok(dg) => dg,
            Err(_) => {
                self.counters.corrupt_dropped += 1;
                return None;
            }
        };
        if self.last_applied_seq.is_some_and(|last| dg.seq <= last) {
            self.counters.stale_dropped += 1;
            return None;
        }
        let cmd = dg.command();
        self.counters.applied += 1;
        self.last_applied_seq = Some(dg.seq);
        self.last_command = Some(cmd);
        self.last_arrival_t_us = arrival_t_us;
        self.last_latency_us = Some(arrival_t_us as i64 - dg.t_us as i64);
        self.failsafe_latched = false;
        Some(cmd)
    }

    /// Emit a stop override (zero throttle, steering held) once the link has
    /// been silent for `timeout_us`; at most once per silence period.
    pub fn failsafe_check(&mut self, now_us: u64, timeout_us: u64) -> Option<MotionCommand> {
        if self.failsafe_latched || now_us.saturating_sub(self.last_arrival_t_us) < timeout_us {
            return None;
        }
        self.failsafe_latched = true;
        self.failsafe_overrides += 1;
        Some(MotionCommand {
            throttle: 0.0,
            steering_delta_deg: self.last_command.map_or(0.0, |c| c.steering_delta_deg),
        })
    }

    pub fn failsafe_active(&self) -> bool {
        self.failsafe_latched
    }

    pub fn failsafe_overrides(&self) -> u64 {
        self.failsafe_overrides
    }
}
