//! Virtual scooter motion driven by the command stream.
//!
//! Heading is measured in degrees, increasing for right turns; position
//! advances along `(cos heading, sin heading)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::normalize_deg;
use crate::mcu::MotionCommand;

/// Bicycle-mode steer angle is clamped here to stay clear of the tan pole.
pub const MAX_BICYCLE_STEER_DEG: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("integration step must be positive, got {0} s")]
    NonPositiveDt(f64),
    #[error("command out of range: {0:?}")]
    InvalidCommand(MotionCommand),
    #[error("sim_dt_us {sim_dt_us} does not divide control period {control_period_us}")]
    CadenceMismatch {
        sim_dt_us: u64,
        control_period_us: u64,
    },
    #[error("invalid kinematic parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = KinematicsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScooterPose {
    pub x: f64,
    pub y: f64,
    heading_deg: f64,
}

impl ScooterPose {
    pub fn new(x: f64, y: f64, heading_deg: f64) -> Self {
        ScooterPose {
            x,
            y,
            heading_deg: normalize_deg(heading_deg),
        }
    }

    pub fn heading_deg(&self) -> f64 {
        self.heading_deg
    }

    pub fn distance_to(&self, other: &ScooterPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteeringMode {
    /// Handlebar deflection sets a yaw rate: `yaw_gain` deg/s per degree.
    DirectRate,
    /// Handlebar deflection is a front-wheel angle on a bicycle with `wheelbase`.
    Bicycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicParams {
    /// Speed at full throttle, m/s.
    pub v_max: f64,
    pub steering_mode: SteeringMode,
    pub yaw_gain: f64,
    /// Meters.
    pub wheelbase: f64,
    pub sim_dt_us: u64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        KinematicParams {
            v_max: 6.0,
            steering_mode: SteeringMode::DirectRate,
            yaw_gain: 1.0,
            wheelbase: 0.8,
            sim_dt_us: 7_850,
        }
    }
}

impl KinematicParams {
    pub fn validate(&self, control_period_us: u64) -> Result<()> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(KinematicsError::InvalidParams(format!(
                "v_max must be positive, got {}",
                self.v_max
            )));
        }
        if !(self.wheelbase.is_finite() && self.wheelbase > 0.0) {
            return Err(KinematicsError::InvalidParams(format!(
                "wheelbase must be positive, got {}",
                self.wheelbase
            )));
        }
        if !self.yaw_gain.is_finite() {
            return Err(KinematicsError::InvalidParams(
                "yaw_gain must be finite".into(),
            ));
        }
        check_cadence(self.sim_dt_us, control_period_us)
    }

    pub fn sim_dt_s(&self) -> f64 {
        self.sim_dt_us as f64 / 1e6
    }

    /// Heading rate in deg/s for a given speed and command.
    pub fn yaw_rate_deg_s(&self, v: f64, cmd: &MotionCommand) -> f64 {
        match self.steering_mode {
            SteeringMode::DirectRate => cmd.steering_delta_deg * self.yaw_gain,
            SteeringMode::Bicycle => {
                let steer = cmd
                    .steering_delta_deg
                    .clamp(-MAX_BICYCLE_STEER_DEG, MAX_BICYCLE_STEER_DEG)
                    .to_radians();
                (v / self.wheelbase * steer.tan()).to_degrees()
            }
        }
    }
}

fn check_cadence(sim_dt_us: u64, control_period_us: u64) -> Result<()> {
    if sim_dt_us == 0 || !control_period_us.is_multiple_of(sim_dt_us) {
        return Err(KinematicsError::CadenceMismatch {
            sim_dt_us,
            control_period_us,
        });
    }
    Ok(())
}

/// One explicit-Euler step of `dt_s` seconds. Position uses the heading at the
/// start of the step.
pub fn step(
    pose: &ScooterPose,
    cmd: &MotionCommand,
    params: &KinematicParams,
    dt_s: f64,
) -> Result<ScooterPose> {
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(KinematicsError::NonPositiveDt(dt_s));
    }
    if !cmd.is_valid() {
        return Err(KinematicsError::InvalidCommand(*cmd));
    }
    let v = cmd.throttle * params.v_max;
    let h = pose.heading_deg.to_radians();
    let rate = params.yaw_rate_deg_s(v, cmd);
    Ok(ScooterPose {
        x: pose.x + v * h.cos() * dt_s,
        y: pose.y + v * h.sin() * dt_s,
        heading_deg: normalize_deg(pose.heading_deg + rate * dt_s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedCommand {
    pub t_us: u64,
    pub cmd: MotionCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t_us: u64,
    pub pose: ScooterPose,
}

/// Integrate a command log, holding each command for one control period.
/// Returns the pose after every sim tick.
pub fn zero_order_hold(
    start: ScooterPose,
    commands: &[TimedCommand],
    params: &KinematicParams,
    control_period_us: u64,
) -> Result<Vec<TimedPose>> {
    check_cadence(params.sim_dt_us, control_period_us)?;
    let substeps = control_period_us / params.sim_dt_us;
    let dt_s = params.sim_dt_s();
    let mut pose = start;
    let mut out = Vec::with_capacity(commands.len() * substeps as usize);
    for tc in commands {
        for j in 1..=substeps {
            pose = step(&pose, &tc.cmd, params, dt_s)?;
            out.push(TimedPose {
                t_us: tc.t_us + j * params.sim_dt_us,
                pose,
            });
        }
    }
    Ok(out)
}

/// One trajectory export line: `t_us x y heading_deg`, six decimals.
pub fn format_pose_line(tp: &TimedPose) -> String {
    format!(
        "{} {:.6} {:.6} {:.6}",
        tp.t_us,
        tp.pose.x,
        tp.pose.y,
        tp.pose.heading_deg()
    )
}

pub fn export_trajectory(trajectory: &[TimedPose]) -> String {
    let mut out = String::with_capacity(trajectory.len() * 40);
    for tp in trajectory {
        let _ = writeln!(out, "{}", format_pose_line(tp));
    }
    out
}

/// Total path length along a trajectory, starting from `start`.
pub fn path_length(start: &ScooterPose, trajectory: &[TimedPose]) -> f64 {
    let mut prev = *start;
    let mut total = 0.0;
    for tp in trajectory {
        total += prev.distance_to(&tp.pose);
        prev = tp.pose;
    }
    total
}
