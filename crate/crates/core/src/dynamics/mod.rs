//! Kinematic bicycle model, PID tracking, box collision geometry and forward simulation.

mod collision;
mod pid;

pub use collision::{obb_distance, obb_overlap, time_to_contact, Obb};
pub use pid::{PathSample, PidController, PidGains, TrackingPath};

use crate::geom::wrap_angle;
use serde::{Deserialize, Serialize};

/// Simulation step of the 10 Hz closed loop (s).
pub const DEFAULT_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    /// Realised longitudinal acceleration over the last step.
    pub accel: f64,
    pub steering: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn at(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            speed,
            ..Self::default()
        }
    }

    pub fn position(&self) -> crate::geom::Vec2 {
        crate::geom::Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> crate::geom::Vec2 {
        crate::geom::Vec2::from_heading(self.heading) * self.speed
    }

    /// Lateral acceleration `v * yaw_rate`.
    pub fn lateral_accel(&self) -> f64 {
        self.speed * self.yaw_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleShape {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
}

impl Default for VehicleShape {
    fn default() -> Self {
        Self {
            length: 4.5,
            width: 2.0,
            wheelbase: 2.8,
        }
    }
}

impl VehicleShape {
    pub fn is_valid(&self) -> bool {
        self.length > self.wheelbase && self.wheelbase > 0.0 && self.width > 0.0
    }
}

/// Actuation bounds shared by every vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsLimits {
    pub accel_min: f64,
    pub accel_max: f64,
    pub steer_max: f64,
    pub speed_cap: f64,
}

impl Default for DynamicsLimits {
    fn default() -> Self {
        Self {
            accel_min: -6.0,
            accel_max: 3.0,
            steer_max: 0.5,
            speed_cap: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub accel: f64,
    pub steer: f64,
}

impl ControlCommand {
    /// Builds a command clamped to the actuation bounds.
    pub fn new(accel: f64, steer: f64, limits: &DynamicsLimits) -> Self {
        Self {
            accel: accel.clamp(limits.accel_min, limits.accel_max),
            steer: steer.clamp(-limits.steer_max, limits.steer_max),
        }
    }
}

/// One semi-implicit Euler step of the rear-axle bicycle model.
///
/// Speed is updated first and drives both the heading and the position update; the position
/// uses the heading from the start of the step.
pub fn bicycle_step(
    state: &VehicleState,
    cmd: &ControlCommand,
    shape: &VehicleShape,
    limits: &DynamicsLimits,
    dt: f64,
) -> VehicleState {
    let v = (state.speed + cmd.accel * dt).clamp(0.0, limits.speed_cap);
    let yaw_rate = v * cmd.steer.tan() / shape.wheelbase;
    let (s, c) = state.heading.sin_cos();
    VehicleState {
        x: state.x + v * c * dt,
        y: state.y + v * s * dt,
        heading: wrap_angle(state.heading + yaw_rate * dt),
        speed: v,
        accel: (v - state.speed) / dt,
        steering: cmd.steer,
        yaw_rate,
    }
}

/// Propagates each agent with its current action held constant for `steps` steps.
/// Every returned sequence has `steps + 1` states, starting with the current one.
pub fn forecast_background(
    agents: &[(VehicleState, VehicleShape)],
    actions: &[ControlCommand],
    steps: usize,
    limits: &DynamicsLimits,
    dt: f64,
) -> Vec<Vec<VehicleState>> {
    assert_eq!(agents.len(), actions.len(), "one action per agent");
    agents
        .iter()
        .zip(actions)
        .map(|((state, shape), cmd)| {
            let mut seq = Vec::with_capacity(steps + 1);
            seq.push(*state);
            for _ in 0..steps {
                let next = bicycle_step(seq.last().unwrap(), cmd, shape, limits, dt);
                seq.push(next);
            }
            seq
        })
        .collect()
}

/// A forward-simulated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub candidate: usize,
    /// States for t = 0..=H; `states[0]` is the starting state.
    pub states: Vec<VehicleState>,
    /// Longitudinal jerk per step (0 at t = 0).
    pub jerk: Vec<f64>,
    pub commands: Vec<ControlCommand>,
}

/// Tracks `path` with a fresh PID controller for `steps` ticks.
pub fn forward_simulate(
    state: &VehicleState,
    shape: &VehicleShape,
    path: &TrackingPath,
    steps: usize,
    gains: &PidGains,
    limits: &DynamicsLimits,
    candidate: usize,
) -> Rollout {
    let dt = path.dt();
    let mut pid = PidController::new(*gains);
    let mut states = Vec::with_capacity(steps + 1);
    let mut jerk = Vec::with_capacity(steps + 1);
    let mut commands = Vec::with_capacity(steps);
    states.push(*state);
    jerk.push(0.0);
    for k in 0..steps {
        let cur = states[k];
        let cmd = pid.track(&cur, path, k as f64 * dt, shape.wheelbase, limits);
        let next = bicycle_step(&cur, &cmd, shape, limits, dt);
        jerk.push((next.accel - cur.accel) / dt);
        commands.push(cmd);
        states.push(next);
    }
    Rollout {
        candidate,
        states,
        jerk,
        commands,
    }
}
