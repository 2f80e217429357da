use super::{ControlCommand, DynamicsLimits, VehicleState};
use crate::geom::{cumulative_length, point_at_arclength, project_onto_polyline, wrap_angle, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    pub kp_lon: f64,
    pub ki_lon: f64,
    pub kd_lon: f64,
    pub kp_lat: f64,
    pub ki_lat: f64,
    pub kd_lat: f64,
    /// Weight of the heading error in the lateral error signal.
    pub k_heading: f64,
    /// Bound on each integral term's accumulated error.
    pub integral_limit: f64,
    /// Lateral errors are measured at a point this far ahead of the vehicle (m), plus
    /// `preview_time` seconds of travel.
    pub preview_min: f64,
    pub preview_time: f64,
    /// Weight of the path-curvature steering feedforward.
    pub k_feedforward: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp_lon: 10.0,
            ki_lon: 0.1,
            kd_lon: 0.0,
            kp_lat: 0.6,
            ki_lat: 0.02,
            kd_lat: 0.05,
            k_heading: 2.0,
            integral_limit: 5.0,
            preview_min: 2.0,
            preview_time: 0.0,
            k_feedforward: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

/// A time-indexed path for the tracker: sample `k` is the target at time `k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingPath {
    samples: Vec<PathSample>,
    positions: Vec<Vec2>,
    cumulative: Vec<f64>,
    dt: f64,
}

impl TrackingPath {
    pub fn new(samples: Vec<PathSample>, dt: f64) -> Self {
        assert!(
            !samples.is_empty(),
            "tracking path needs at least one sample"
        );
        assert!(dt > 0.0);
        let positions: Vec<Vec2> = samples.iter().map(|s| s.position).collect();
        let cumulative = cumulative_length(&positions);
        Self {
            samples,
            positions,
            cumulative,
            dt,
        }
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Target speed at time `t`, read one sample ahead so the controller leads the profile.
    pub fn speed_at(&self, t: f64) -> f64 {
        let k = (t / self.dt).round().max(0.0) as usize + 1;
        self.samples[k.min(self.samples.len() - 1)].speed
    }

    /// Cross-track error (left positive) and heading error of a pose relative to the path.
    /// Both are zero for a path of zero length.
    pub fn tracking_errors(&self, position: Vec2, heading: f64) -> (f64, f64) {
        if self.length() <= 1e-9 {
            return (0.0, 0.0);
        }
        let pr = project_onto_polyline(position, &self.positions, &self.cumulative);
        (pr.lateral, wrap_angle(heading - pr.tangent.heading()))
    }

    /// Signed curvature (left positive) around the point of the path nearest `position`,
    /// from the tangent change over a 2 m window.
    pub fn curvature_near(&self, position: Vec2) -> f64 {
        const HALF_WINDOW: f64 = 1.0;
        let len = self.length();
        if len <= 2.0 * HALF_WINDOW {
            return 0.0;
        }
        self.curvature_at(
            project_onto_polyline(position, &self.positions, &self.cumulative).arclength,
        )
    }

    fn curvature_at(&self, s: f64) -> f64 {
        const HALF_WINDOW: f64 = 1.0;
        let len = self.length();
        if len <= 2.0 * HALF_WINDOW {
            return 0.0;
        }
        let (a, b) = ((s - HALF_WINDOW).max(0.0), (s + HALF_WINDOW).min(len));
        let (a, b) = if b - a < 2.0 * HALF_WINDOW {
            if a == 0.0 {
                (0.0, 2.0 * HALF_WINDOW)
            } else {
                (len - 2.0 * HALF_WINDOW, len)
            }
        } else {
            (a, b)
        };
        let (_, ta) = point_at_arclength(&self.positions, &self.cumulative, a);
        let (_, tb) = point_at_arclength(&self.positions, &self.cumulative, b);
        wrap_angle(tb.heading() - ta.heading()) / (b - a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Channel {
    integral: f64,
    previous: Option<f64>,
}

impl Channel {
    const fn new() -> Self {
        Self {
            integral: 0.0,
            previous: None,
        }
    }

    fn update(&mut self, err: f64, kp: f64, ki: f64, kd: f64, limit: f64, dt: f64) -> f64 {
        self.integral = (self.integral + err * dt).clamp(-limit, limit);
        let deriv = self.previous.map_or(0.0, |p| (err - p) / dt);
        self.previous = Some(err);
        kp * err + ki * self.integral + kd * deriv
    }
}

/// Longitudinal and lateral PID loops with clamped integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidController {
    gains: PidGains,
    lon: Channel,
    lat: Channel,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            lon: Channel::new(),
            lat: Channel::new(),
        }
    }

    pub fn longitudinal(&mut self, speed_error: f64, dt: f64, limits: &DynamicsLimits) -> f64 {
        let g = &self.gains;
        self.lon
            .update(
                speed_error,
                g.kp_lon,
                g.ki_lon,
                g.kd_lon,
                g.integral_limit,
                dt,
            )
            .clamp(limits.accel_min, limits.accel_max)
    }

    /// Steering from cross-track and heading errors (positive errors steer right).
    pub fn lateral(
        &mut self,
        cross_track: f64,
        heading_error: f64,
        dt: f64,
        limits: &DynamicsLimits,
    ) -> f64 {
        let g = &self.gains;
        let err = cross_track + g.k_heading * heading_error;
        (-self
            .lat
            .update(err, g.kp_lat, g.ki_lat, g.kd_lat, g.integral_limit, dt))
        .clamp(-limits.steer_max, limits.steer_max)
    }

    /// Command that tracks `path` at time `t`.
    pub fn track(
        &mut self,
        state: &VehicleState,
        path: &TrackingPath,
        t: f64,
        wheelbase: f64,
        limits: &DynamicsLimits,
    ) -> ControlCommand {
        let dt = path.dt();
        let accel = self.longitudinal(path.speed_at(t) - state.speed, dt, limits);
        let steer = if path.length() <= 1e-9 {
            0.0
        } else {
            let preview = self.gains.preview_min + self.gains.preview_time * state.speed;
            let probe = state.position() + Vec2::from_heading(state.heading) * preview;
            let near = project_onto_polyline(state.position(), &path.positions, &path.cumulative);
            let he = wrap_angle(state.heading - near.tangent.heading());
            let (cte, _) = path.tracking_errors(probe, state.heading);
            let feedforward =
                self.gains.k_feedforward * (wheelbase * path.curvature_at(near.arclength)).atan();
            (feedforward + self.lateral(cte, he, dt, limits))
                .clamp(-limits.steer_max, limits.steer_max)
        };
        ControlCommand::new(accel, steer, limits)
    }
}
