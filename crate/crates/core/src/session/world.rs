//! Receiving end of the link: applies datagrams, runs the failsafe and
//! integrates the scooter pose on the sim tick grid.

use super::log::{Event, EventKind};
use crate::config::SimConfig;
use crate::kinematics::{step, KinematicParams, KinematicsError, ScooterPose, TimedPose};
use crate::mcu::MotionCommand;
use crate::telemetry::ReceiverState;

#[derive(Debug, Clone)]
pub struct World {
    params: KinematicParams,
    failsafe_timeout_us: u64,
    pose: ScooterPose,
    command: MotionCommand,
    receiver: ReceiverState,
    t_us: u64,
}

impl World {
    pub fn new(config: &SimConfig) -> Self {
        World {
            params: config.kinematics,
            failsafe_timeout_us: config.failsafe_timeout_us(),
            pose: ScooterPose::default(),
            command: MotionCommand::STOP,
            receiver: ReceiverState::new(),
            t_us: 0,
        }
    }

    pub fn pose(&self) -> ScooterPose {
        self.pose
    }

    pub fn t_us(&self) -> u64 {
        self.t_us
    }

    /// Command currently driving the scooter.
    pub fn command(&self) -> MotionCommand {
        self.command
    }

    pub fn receiver(&self) -> &ReceiverState {
        &self.receiver
    }

    /// Integrate every sim tick ending at or before `t_us`. Each tick first
    /// gives the failsafe a chance to override, then takes one Euler step.
    pub fn advance_to(
        &mut self,
        t_us: u64,
        sink: &mut impl FnMut(Event),
    ) -> Result<(), KinematicsError> {
        let dt_us = self.params.sim_dt_us;
        let dt_s = self.params.sim_dt_s();
        while self.t_us + dt_us <= t_us {
            if let Some(stop) = self
                .receiver
                .failsafe_check(self.t_us, self.failsafe_timeout_us)
            {
                self.command = stop;
                sink(Event {
                    t_us: self.t_us,
                    kind: EventKind::Failsafe {
                        steering_delta_deg: stop.steering_delta_deg,
                    },
                });
            }
            self.pose = step(&self.pose, &self.command, &self.params, dt_s)?;
            self.t_us += dt_us;
            sink(Event::pose(&TimedPose {
                t_us: self.t_us,
                pose: self.pose,
            }));
        }
        Ok(())
    }

    pub fn on_datagram(&mut self, bytes: &[u8], arrival_t_us: u64) -> Option<MotionCommand> {
        let applied = self.receiver.receive(bytes, arrival_t_us)?;
        self.command = applied;
        Some(applied)
    }
}
