use super::log::{EventKind, SessionLog};
use super::world::World;
use super::SessionError;
use crate::kinematics::{format_pose_line, KinematicParams, ScooterPose, TimedPose};

/// Rebuild the pose trajectory from a log's header and received datagrams.
/// When `kinematics` is given it must equal the recorded parameters.
pub fn replay(
    log: &SessionLog,
    kinematics: Option<&KinematicParams>,
) -> Result<Vec<TimedPose>, SessionError> {
    if let Some(k) = kinematics {
        if *k != log.config.kinematics {
            return Err(SessionError::RefusedConfigMismatch {
                recorded: Box::new(log.config.kinematics),
                requested: Box::new(*k),
            });
        }
    }
    let mut world = World::new(&log.config);
    let mut trajectory = Vec::new();
    let mut sink = |ev: super::log::Event| {
        if let EventKind::Pose { x, y, heading_deg } = ev.kind {
            trajectory.push(TimedPose {
                t_us: ev.t_us,
                pose: ScooterPose::new(x, y, heading_deg),
            });
        }
    };
    for ev in &log.events {
        if let EventKind::Rx(bytes) = &ev.kind {
            world.advance_to(ev.t_us, &mut sink)?;
            world.on_datagram(bytes, ev.t_us);
        }
    }
    world.advance_to(log.duration_us, &mut sink)?;
    Ok(trajectory)
}

/// Outcome of checking a replay against the recorded POSE events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayCheck {
    pub poses: usize,
    /// First differing export line, `(recorded, replayed)`.
    pub first_mismatch: Option<(String, String)>,
}

impl ReplayCheck {
    pub fn matches(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

pub fn verify_replay(log: &SessionLog) -> Result<ReplayCheck, SessionError> {
    let replayed: Vec<String> = replay(log, None)?.iter().map(format_pose_line).collect();
    let recorded = log.recorded_trajectory_lines();
    let first_mismatch = if replayed.len() != recorded.len() {
        Some((
            format!("{} poses", recorded.len()),
            format!("{} poses", replayed.len()),
        ))
    } else {
        recorded
            .iter()
            .zip(&replayed)
            .find(|(a, b)| a != b)
            .map(|(a, b)| (a.clone(), b.clone()))
    };
    Ok(ReplayCheck {
        poses: replayed.len(),
        first_mismatch,
    })
}
