//! Frozen candidate generator: reference line x speed profile lattice.

use crate::dynamics::{PathSample, TrackingPath, VehicleState};
use crate::error::{Error, Result};
use crate::geom::{cumulative_length, point_at_arclength, Vec2};
use crate::worldmap::ReferenceLine;
use serde::{Deserialize, Serialize};

/// Distance over which the initial lateral offset is blended out (m).
pub const BLEND_LENGTH: f64 = 30.0;
const PATH_SAMPLE_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub n_lon: usize,
    /// Points per candidate (T).
    pub horizon: usize,
    pub dt: f64,
    pub v_max: f64,
    pub a_limit: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_lon: 12,
            horizon: 80,
            dt: 0.1,
            v_max: 20.0,
            a_limit: 3.0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lon == 0
            || self.horizon < 2
            || !(self.dt > 0.0)
            || !(self.v_max > 0.0)
            || !(self.a_limit > 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "invalid candidate generation config {self:?}"
            )));
        }
        Ok(())
    }
}

/// One trajectory point `[p_x, p_y, cos, sin, v_x, v_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    pub x: f64,
    pub y: f64,
    pub cos: f64,
    pub sin: f64,
    pub vx: f64,
    pub vy: f64,
}

impl CandidatePoint {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> f64 {
        self.sin.atan2(self.cos)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.x, self.y, self.cos, self.sin, self.vx, self.vy]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrajectory {
    pub points: Vec<CandidatePoint>,
    pub ref_index: usize,
    pub lon_index: usize,
    /// Set when the reference line ran out and the terminal point is held.
    pub truncated: bool,
}

impl CandidateTrajectory {
    pub fn tracking_path(&self, dt: f64) -> TrackingPath {
        TrackingPath::new(
            self.points
                .iter()
                .map(|p| PathSample {
                    position: p.position(),
                    heading: p.heading(),
                    speed: p.speed(),
                })
                .collect(),
            dt,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<CandidateTrajectory>,
    pub config: GenerationConfig,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Target terminal speeds evenly spaced over `[0, v_max]` (a single profile targets 0).
pub fn target_speeds(n_lon: usize, v_max: f64) -> Vec<f64> {
    if n_lon == 1 {
        return vec![0.0];
    }
    (0..n_lon)
        .map(|j| v_max * j as f64 / (n_lon - 1) as f64)
        .collect()
}

/// Speed profiles that ramp from `v0` toward each target at `a_limit` and then hold.
///
/// `v0` is clamped into `[0, v_max]` so every profile respects the speed band.
pub fn longitudinal_profiles(
    v0: f64,
    n_lon: usize,
    v_max: f64,
    steps: usize,
    dt: f64,
    a_limit: f64,
) -> Vec<Vec<f64>> {
    let v0 = v0.clamp(0.0, v_max);
    let dv = a_limit * dt;
    target_speeds(n_lon, v_max)
        .into_iter()
        .map(|target| {
            (0..steps)
                .map(|k| {
                    let ramp = k as f64 * dv;
                    if v0 < target {
                        (v0 + ramp).min(target)
                    } else {
                        (v0 - ramp).max(target)
                    }
                })
                .collect()
        })
        .collect()
}

/// The blended path for one reference line: starts exactly at `anchor` and converges
/// onto the line with a quintic lateral blend.
fn blended_path(anchor: Vec2, line: &ReferenceLine) -> Vec<Vec2> {
    let (s0, d0) = line.project(anchor);
    let end = line.length();
    let blend = BLEND_LENGTH.min(end);
    let mut path = vec![anchor];
    let mut j = 1;
    loop {
        let s = (s0 + j as f64 * PATH_SAMPLE_STEP).min(end);
        if s <= s0 {
            break;
        }
        let u = ((s - s0) / blend).clamp(0.0, 1.0);
        let u3 = u * u * u;
        let offset_weight = 1.0 - u3 * (10.0 - 15.0 * u + 6.0 * u * u);
        let (p, h) = line.sample(s);
        let point = p + Vec2::from_heading(h).perp() * d0 * offset_weight;
        if path.last().unwrap().distance(point) > 1e-9 {
            path.push(point);
        }
        if s >= end {
            break;
        }
        j += 1;
    }
    path
}

/// Enumerates `refs.len() * n_lon` candidates (reference-major order).
pub fn generate_candidates(
    state: &VehicleState,
    refs: &[ReferenceLine],
    cfg: &GenerationConfig,
) -> Result<CandidateSet> {
    if refs.is_empty() {
        return Err(Error::EmptyInput("reference lines"));
    }
    cfg.validate()?;
    let anchor = state.position();
    let profiles = longitudinal_profiles(
        state.speed,
        cfg.n_lon,
        cfg.v_max,
        cfg.horizon,
        cfg.dt,
        cfg.a_limit,
    );
    let mut candidates = Vec::with_capacity(refs.len() * cfg.n_lon);
    for (r, line) in refs.iter().enumerate() {
        let path = blended_path(anchor, line);
        let cum = cumulative_length(&path);
        let total = *cum.last().unwrap();
        for (l, profile) in profiles.iter().enumerate() {
            let mut points = Vec::with_capacity(cfg.horizon);
            let mut truncated = false;
            let mut s = 0.0;
            for k in 0..cfg.horizon {
                if k > 0 {
                    s += 0.5 * (profile[k - 1] + profile[k]) * cfg.dt;
                }
                let (pos, tangent) = if path.len() == 1 {
                    (anchor, Vec2::from_heading(state.heading))
                } else {
                    point_at_arclength(&path, &cum, s)
                };
                let mut v = profile[k];
                if s > total + 1e-9 {
                    truncated = true;
                    v = 0.0;
                }
                let pos = if k == 0 { anchor } else { pos };
                points.push(CandidatePoint {
                    x: pos.x,
                    y: pos.y,
                    cos: tangent.x,
                    sin: tangent.y,
                    vx: v * tangent.x,
                    vy: v * tangent.y,
                });
            }
            candidates.push(CandidateTrajectory {
                points,
                ref_index: r,
                lon_index: l,
                truncated,
            });
        }
    }
    Ok(CandidateSet {
        candidates,
        config: *cfg,
    })
}
