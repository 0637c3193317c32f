//! Software-defined scooter locomotion rig.
//!
//! Emulated treadmill and handlebar encoders feed an MCU stage that emits
//! normalized motion commands every control period. Commands travel as
//! CRC-checked datagrams to a world that integrates the virtual scooter pose.
//!
//! ```
//! use navis_core::{run_session, RideProfile, SimConfig};
//!
//! let ride = RideProfile::parse("0 1.0 0\n1000000 1.0 15\n").unwrap();
//! let log = run_session(SimConfig::default(), ride, 1_000_000).unwrap();
//! assert_eq!(log.count("CMD"), 6);
//! ```

pub mod angle;
pub mod config;
pub mod crc;
pub mod encoder;
pub mod fixed;
pub mod kinematics;
pub mod mcu;
pub mod session;
pub mod telemetry;

pub use config::{ConfigError, InputLimits, RunMode, SimConfig};
pub use encoder::{
    emulate_ride, quadrature_step, ticks_to_rps, AbsoluteAngle, EncoderConfig, EncoderError,
    IncrementalSample, QuadraturePhase, RideProfile, SampleClock, SensorSample, Setpoint,
};
pub use fixed::Q16;
pub use kinematics::{
    step, zero_order_hold, KinematicParams, KinematicsError, ScooterPose, SteeringMode,
    TimedCommand, TimedPose,
};
pub use mcu::{
    decode_uart_frame, encode_uart_frame, steering_delta, throttle_map, Mcu, MotionCommand,
    PipelineConfig, PipelineError, UartError,
};
pub use session::{
    replay, run_session, verify_replay, LiveHandle, LiveSession, Session, SessionError, SessionLog,
    StateSnapshot,
};
pub use telemetry::{
    decode_datagram, encode_datagram, LinkCounters, ReceiverState, TelemetryDatagram,
    TelemetryError, TransportConfig,
};
