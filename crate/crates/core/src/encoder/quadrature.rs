use serde::{Deserialize, Serialize};

use super::{EncoderError, Result};

/// Instantaneous levels of the two quadrature channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct QuadraturePhase {
    pub a: bool,
    pub b: bool,
}

impl QuadraturePhase {
    /// Forward Gray-code order: 00 -> 10 -> 11 -> 01 -> 00.
    pub const FORWARD: [QuadraturePhase; 4] = [
        QuadraturePhase { a: false, b: false },
        QuadraturePhase { a: true, b: false },
        QuadraturePhase { a: true, b: true },
        QuadraturePhase { a: false, b: true },
    ];

    pub const fn new(a: bool, b: bool) -> Self {
        QuadraturePhase { a, b }
    }

    fn gray_index(self) -> u8 {
        match (self.a, self.b) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }

    /// Phase produced by a shaft sitting at `position` ticks.
    pub fn at_position(position: i64) -> QuadraturePhase {
        Self::FORWARD[position.rem_euclid(4) as usize]
    }
}

/// Decode one transition into a signed tick.
pub fn quadrature_step(prev: QuadraturePhase, next: QuadraturePhase) -> Result<i8> {
    match (next.gray_index() + 4 - prev.gray_index()) % 4 {
        0 => Ok(0),
        1 => Ok(1),
        3 => Ok(-1),
        _ => Err(EncoderError::InvalidTransition {
            from: prev,
            to: next,
        }),
    }
}

/// Running decoder holding the last phase seen and the cumulative count.
#[derive(Debug, Clone, Default)]
pub struct QuadratureDecoder {
    phase: QuadraturePhase,
    count: i64,
    errors: u64,
}

impl QuadratureDecoder {
    pub fn new(initial: QuadraturePhase) -> Self {
        QuadratureDecoder {
            phase: initial,
            count: 0,
            errors: 0,
        }
    }

    /// Feed the next observed phase. On an invalid transition the count is left
    /// untouched, the phase is resynchronized and the error is returned.
    pub fn update(&mut self, next: QuadraturePhase) -> Result<i64> {
        let step = quadrature_step(self.phase, next);
        self.phase = next;
        match step {
            Ok(s) => {
                self.count += s as i64;
                Ok(self.count)
            }
            Err(e) => {
                self.errors += 1;
                Err(e)
            }
        }
    }

    pub fn count(&self) -> i64 {
        self.count
    }

    pub fn phase(&self) -> QuadraturePhase {
        self.phase
    }

    pub fn error_count(&self) -> u64 {
        self.errors
    }
}
