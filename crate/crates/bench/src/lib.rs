//! Shared fixtures for the criterion benches.

use navis_core::{RideProfile, Setpoint};

/// Push off, weave left and right, coast to a stop.
pub fn weaving_ride(duration_us: u64) -> RideProfile {
    let steps = 20u64;
    let setpoints = (0..=steps)
        .map(|k| Setpoint {
            t_us: k * duration_us / steps,
            rps: if k == steps { 0.0 } else { 1.5 },
            handlebar_deg: if k % 2 == 0 { 25.0 } else { -25.0 },
        })
        .collect();
    RideProfile::new(setpoints).expect("ordered setpoints")
}
