//! Built-in desk-scale maps.

use super::{DrivableArea, Lane, LaneGraph, LaneId, RoadMap};
use crate::error::{Error, Result};
use crate::geom::{Polygon, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Straight,
    Curve,
    FourWayIntersection,
}

/// Geometry parameters, tagged by map kind. Lengths in metres, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapParams {
    /// Parallel same-direction lanes along +x; lane 0 is the rightmost.
    Straight {
        length: f64,
        lanes: usize,
        width: f64,
        #[serde(default = "super::default_target_speed")]
        speed_limit: f64,
    },
    /// Left-hand circular arc starting at the origin heading +x; `radius` is lane 0's radius.
    Curve {
        radius: f64,
        angle: f64,
        lanes: usize,
        width: f64,
        #[serde(default = "super::default_target_speed")]
        speed_limit: f64,
    },
    /// Single-lane-per-direction crossroads centred on the origin, right-hand traffic.
    /// The junction box extends `width + corner_radius` from the centre; right turns use
    /// radius `corner_radius + width / 2`.
    FourWayIntersection {
        arm_length: f64,
        width: f64,
        #[serde(default = "super::default_target_speed")]
        speed_limit: f64,
        #[serde(default = "default_corner_radius")]
        corner_radius: f64,
    },
}

impl MapParams {
    pub fn kind(&self) -> MapKind {
        match self {
            MapParams::Straight { .. } => MapKind::Straight,
            MapParams::Curve { .. } => MapKind::Curve,
            MapParams::FourWayIntersection { .. } => MapKind::FourWayIntersection,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn default_corner_radius() -> f64 {
    DEFAULT_CORNER_RADIUS
}

/// Default kerb clearance of the junction box (m).
pub const DEFAULT_CORNER_RADIUS: f64 = 6.0;

/// Speed factor applied to turning connectors of the intersection.
const TURN_SPEED_FACTOR: f64 = 0.6;

pub fn synthesize_map(params: &MapParams) -> Result<RoadMap> {
    let map = match *params {
        MapParams::Straight {
            length,
            lanes,
            width,
            speed_limit,
        } => straight(length, lanes, width, speed_limit)?,
        MapParams::Curve {
            radius,
            angle,
            lanes,
            width,
            speed_limit,
        } => curve(radius, angle, lanes, width, speed_limit)?,
        MapParams::FourWayIntersection {
            arm_length,
            width,
            speed_limit,
            corner_radius,
        } => four_way(arm_length, width, speed_limit, corner_radius)?,
    };
    map.validate_corridors()?;
    Ok(map)
}

fn neighbors(i: usize, n: usize) -> (Option<LaneId>, Option<LaneId>) {
    let left = (i + 1 < n).then(|| LaneId(i as u32 + 1));
    let right = (i > 0).then(|| LaneId(i as u32 - 1));
    (left, right)
}

fn straight(length: f64, lanes: usize, width: f64, speed: f64) -> Result<RoadMap> {
    positive("length", length)?;
    positive("width", width)?;
    positive("speed_limit", speed)?;
    if lanes == 0 {
        return Err(Error::InvalidGeometry(
            "straight road needs at least one lane".into(),
        ));
    }
    let lanes_v = (0..lanes)
        .map(|i| {
            let y = (i as f64 + 0.5) * width;
            let (left, right) = neighbors(i, lanes);
            Lane {
                id: LaneId(i as u32),
                centerline: vec![Vec2::new(0.0, y), Vec2::new(length, y)],
                width,
                successors: vec![],
                left,
                right,
                target_speed: speed,
            }
        })
        .collect();
    let area = DrivableArea::new(vec![Polygon::rectangle(
        Vec2::new(0.0, 0.0),
        Vec2::new(length, lanes as f64 * width),
    )])?;
    Ok(RoadMap::new(LaneGraph::new(lanes_v)?, area))
}

fn arc_points(center: Vec2, radius: f64, start_angle: f64, sweep: f64) -> Vec<Vec2> {
    let segments = ((radius * sweep.abs()).ceil() as usize).max(8);
    (0..=segments)
        .map(|k| {
            let a = start_angle + sweep * k as f64 / segments as f64;
            center + Vec2::new(a.cos(), a.sin()) * radius
        })
        .collect()
}

fn curve(radius: f64, angle: f64, lanes: usize, width: f64, speed: f64) -> Result<RoadMap> {
    positive("radius", radius)?;
    positive("angle", angle)?;
    positive("width", width)?;
    positive("speed_limit", speed)?;
    if lanes == 0 {
        return Err(Error::InvalidGeometry(
            "curve needs at least one lane".into(),
        ));
    }
    if angle > 1.5 * std::f64::consts::PI {
        return Err(Error::InvalidGeometry(
            "curve angle must not exceed 1.5 pi".into(),
        ));
    }
    let inner = radius - (lanes as f64 - 0.5) * width;
    if inner <= 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "radius {radius} too small for {lanes} lanes of width {width}"
        )));
    }
    let center = Vec2::new(0.0, radius);
    let start = -FRAC_PI_2;
    let lanes_v = (0..lanes)
        .map(|i| {
            let r = radius - i as f64 * width;
            let (left, right) = neighbors(i, lanes);
            Lane {
                id: LaneId(i as u32),
                centerline: arc_points(center, r, start, angle),
                width,
                successors: vec![],
                left,
                right,
                target_speed: speed,
            }
        })
        .collect();
    // Outer boundary chords are pushed outward so the polygon circumscribes the true arc.
    let outer_r = radius + 0.5 * width;
    let segments = ((outer_r * angle).ceil() as usize).max(16);
    let half_step = 0.5 * angle / segments as f64;
    let outer = arc_points(center, outer_r / half_step.cos(), start, angle);
    let mut inner_pts = arc_points(center, inner, start, angle);
    inner_pts.reverse();
    let mut boundary = outer;
    boundary.extend(inner_pts);
    let area = DrivableArea::new(vec![Polygon::new(boundary)])?;
    Ok(RoadMap::new(LaneGraph::new(lanes_v)?, area))
}

/// Arm directions pointing away from the centre: south, east, north, west.
const ARMS: [Vec2; 4] = [
    Vec2::new(0.0, -1.0),
    Vec2::new(1.0, 0.0),
    Vec2::new(0.0, 1.0),
    Vec2::new(-1.0, 0.0),
];

fn right_of(dir: Vec2) -> Vec2 {
    Vec2::new(dir.y, -dir.x)
}

fn arm_index(dir: Vec2) -> usize {
    ARMS.iter()
        .position(|a| a.distance(dir) < 1e-9)
        .expect("axis-aligned arm direction")
}

/// Lane ids of the four-way intersection: inbound arms 0..4, outbound arms 4..8,
/// connectors 8..20 ordered by inbound arm then (right, straight, left).
pub fn four_way_inbound(arm: usize) -> LaneId {
    LaneId(arm as u32)
}

pub fn four_way_outbound(arm: usize) -> LaneId {
    LaneId(4 + arm as u32)
}

fn four_way(arm_length: f64, width: f64, speed: f64, corner_radius: f64) -> Result<RoadMap> {
    positive("arm_length", arm_length)?;
    positive("width", width)?;
    positive("speed_limit", speed)?;
    positive("corner_radius", corner_radius)?;
    let w = width;
    let half = w + corner_radius;
    let outer = half + arm_length;
    let mut lanes = Vec::new();
    let mut inbound_end = [Vec2::ZERO; 4];
    let mut outbound_start = [Vec2::ZERO; 4];
    for (k, &d) in ARMS.iter().enumerate() {
        let travel_in = -d;
        let off_in = right_of(travel_in) * (0.5 * w);
        inbound_end[k] = d * half + off_in;
        lanes.push(Lane {
            id: four_way_inbound(k),
            centerline: vec![d * outer + off_in, inbound_end[k]],
            width: w,
            successors: vec![],
            left: None,
            right: None,
            target_speed: speed,
        });
        let off_out = right_of(d) * (0.5 * w);
        outbound_start[k] = d * half + off_out;
        lanes.push(Lane {
            id: four_way_outbound(k),
            centerline: vec![outbound_start[k], d * outer + off_out],
            width: w,
            successors: vec![],
            left: None,
            right: None,
            target_speed: speed,
        });
    }
    let mut next_id = 8u32;
    for k in 0..4 {
        let u = -ARMS[k];
        let start = inbound_end[k];
        let targets = [
            (arm_index(right_of(u)), -1.0),
            (arm_index(u), 0.0),
            (arm_index(u.perp()), 1.0),
        ];
        for (m, turn) in targets {
            let end = outbound_start[m];
            let centerline = if turn == 0.0 {
                vec![start, end]
            } else {
                let r = (end - start).dot(u);
                let normal = u.perp() * turn;
                let center = start + normal * r;
                let start_angle = (start - center).heading();
                arc_points(center, r, start_angle, turn * FRAC_PI_2)
            };
            let id = LaneId(next_id);
            next_id += 1;
            lanes.push(Lane {
                id,
                centerline,
                width: w,
                successors: vec![four_way_outbound(m)],
                left: None,
                right: None,
                target_speed: if turn == 0.0 {
                    speed
                } else {
                    speed * TURN_SPEED_FACTOR
                },
            });
            let inbound = lanes
                .iter_mut()
                .find(|l| l.id == four_way_inbound(k))
                .expect("inbound lane exists");
            inbound.successors.push(id);
        }
    }
    // Snap arc end points exactly onto the outbound lane starts.
    for lane in lanes.iter_mut().filter(|l| l.id.0 >= 8) {
        let m = (lane.successors[0].0 - 4) as usize;
        *lane.centerline.last_mut().unwrap() = outbound_start[m];
    }
    let area = DrivableArea::new(vec![
        Polygon::rectangle(Vec2::new(-outer, -w), Vec2::new(outer, w)),
        Polygon::rectangle(Vec2::new(-w, -outer), Vec2::new(w, outer)),
        Polygon::rectangle(Vec2::new(-half, -half), Vec2::new(half, half)),
    ])?;
    Ok(RoadMap::new(LaneGraph::new(lanes)?, area))
}
