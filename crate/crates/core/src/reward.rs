//! State-wise styled reward model and discounted returns.

use crate::dynamics::{obb_overlap, Obb, VehicleShape, VehicleState};
use crate::error::{Error, Result};
use crate::worldmap::{in_drivable, project_to_lane_aligned, RoadMap};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Discount factor for rollout returns.
pub const DEFAULT_GAMMA: f64 = 0.98;

/// Per-state features of a rolled-out trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateFeatures {
    pub collision: bool,
    pub boundary: bool,
    pub a_long: f64,
    pub a_lat: f64,
    /// Heading deviation from the lane, in (-pi, pi].
    pub theta_f: f64,
    /// Signed lateral offset from the lane centerline.
    pub x_f: f64,
    /// Speed magnitude.
    pub v: f64,
    /// Acceleration magnitude `|(a_long, a_lat)|`.
    pub a: f64,
    /// Yaw acceleration.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Normal,
    Aggressive,
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Style::Normal => "normal",
            Style::Aggressive => "aggressive",
        })
    }
}

impl std::str::FromStr for Style {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Style::Normal),
            "aggressive" => Ok(Style::Aggressive),
            _ => Err(Error::InvalidConfig(format!("unknown style '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub collision: f64,
    pub boundary: f64,
    pub comfort: f64,
    pub lane_align: f64,
    pub vel_align: f64,
    pub lane_center: f64,
    pub center_bias: f64,
    pub velocity: f64,
    pub timestep: f64,
}

impl RewardWeights {
    pub const NORMAL: RewardWeights = RewardWeights {
        collision: 20.0,
        boundary: 5.0,
        comfort: 0.8,
        lane_align: 0.5,
        vel_align: 0.05,
        lane_center: 0.6,
        center_bias: 0.0,
        velocity: 0.1,
        timestep: 0.1,
    };

    pub const AGGRESSIVE: RewardWeights = RewardWeights {
        collision: 5.0,
        velocity: 0.2,
        ..Self::NORMAL
    };

    pub fn preset(style: Style) -> Self {
        match style {
            Style::Normal => Self::NORMAL,
            Style::Aggressive => Self::AGGRESSIVE,
        }
    }

    fn as_array(&self) -> [f64; 9] {
        [
            self.collision,
            self.boundary,
            self.comfort,
            self.lane_align,
            self.vel_align,
            self.lane_center,
            self.center_bias,
            self.velocity,
            self.timestep,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub gamma: f64,
    pub style: Style,
}

impl RewardConfig {
    pub fn for_style(style: Style) -> Self {
        Self {
            weights: RewardWeights::preset(style),
            gamma: DEFAULT_GAMMA,
            style,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.as_array().iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig(
                "reward weights must be non-negative".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Reward components, kept separate for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub collision: f64,
    pub off_road: f64,
    pub comfort: f64,
    pub lane_align: f64,
    pub lane_center: f64,
    pub velocity: f64,
    pub timestep: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.collision
            + self.off_road
            + self.comfort
            + self.lane_align
            + self.lane_center
            + self.velocity
            + self.timestep
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn reward_breakdown(phi: &StateFeatures, cfg: &RewardConfig) -> RewardBreakdown {
    let w = &cfg.weights;
    let v = phi.v.abs();
    let cos_f = phi.theta_f.cos();
    let centered = (phi.x_f - w.center_bias).abs();
    RewardBreakdown {
        collision: -(w.collision + v) * indicator(phi.collision),
        off_road: -w.boundary * indicator(phi.boundary),
        comfort: -w.comfort * (indicator(phi.a.abs() > 4.0) + indicator(phi.omega.abs() > 4.0)),
        lane_align: w.lane_align
            * (cos_f.min(0.0)
                + w.vel_align * (cos_f * v).min(0.0)
                + 0.25 * (1.0 - phi.theta_f.abs() / FRAC_PI_2)),
        lane_center: -w.lane_center
            * (indicator(cos_f > 0.5) * (centered - 0.05 / (centered - 0.5).exp())),
        velocity: w.velocity * cos_f.max(0.0) * indicator(v > 3.0 && v < 20.0) * v,
        timestep: -w.timestep * indicator(v > 0.0 || phi.a.abs() > 0.0),
    }
}

pub fn state_wise_reward(phi: &StateFeatures, cfg: &RewardConfig) -> f64 {
    reward_breakdown(phi, cfg).total()
}

/// `Σ_t γ^t r_t`, accumulated front to back.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Features of `states[t]` against other agents' states at the same tick.
pub fn extract_features(
    states: &[VehicleState],
    t: usize,
    shape: &VehicleShape,
    others: &[(VehicleState, VehicleShape)],
    map: &RoadMap,
    dt: f64,
) -> StateFeatures {
    let s = &states[t];
    let own = Obb::from_state(s, shape);
    let collision = others
        .iter()
        .any(|(o, sh)| obb_overlap(&own, &Obb::from_state(o, sh)));
    let boundary = own.corners().iter().any(|c| !in_drivable(*c, &map.area));
    let proj = project_to_lane_aligned(&map.graph, s.position(), s.heading);
    let a_long = s.accel;
    let a_lat = s.lateral_accel();
    let omega = if t == 0 {
        0.0
    } else {
        (s.yaw_rate - states[t - 1].yaw_rate) / dt
    };
    StateFeatures {
        collision,
        boundary,
        a_long,
        a_lat,
        theta_f: proj.heading_error,
        x_f: proj.lateral_offset,
        v: s.speed,
        a: a_long.hypot(a_lat),
        omega,
    }
}
