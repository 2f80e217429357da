//! Lane-graph maps, drivable area, routing and critical-vehicle selection.

mod cbv;
mod reference;
mod routing;
mod scenario;
mod synth;

pub use cbv::{identify_cbv, DEFAULT_CBV_DELTA};
pub use reference::{reference_lines, ReferenceLine, ReferencePoint, REFERENCE_SPACING};
pub use routing::{distance_to_goal, LanePosition, PathStep, RouteQuery};
pub use scenario::{
    AvRoute, BackgroundSpawn, InlineMap, Jitter, LoadedScenario, MapSpec, Scenario, Spawn,
    SCENARIO_FORMAT,
};
pub use synth::{
    four_way_inbound, four_way_outbound, synthesize_map, MapKind, MapParams, DEFAULT_CORNER_RADIUS,
};

use crate::error::{Error, Result};
use crate::geom::{
    cumulative_length, point_at_arclength, project_onto_polyline, wrap_angle, Polygon, Vec2,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Default lane target speed (m/s) when a map does not specify one.
pub const DEFAULT_TARGET_SPEED: f64 = 10.0;

fn default_target_speed() -> f64 {
    DEFAULT_TARGET_SPEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Vec<Vec2>,
    pub width: f64,
    #[serde(default)]
    pub successors: Vec<LaneId>,
    #[serde(default)]
    pub left: Option<LaneId>,
    #[serde(default)]
    pub right: Option<LaneId>,
    /// Free-flow speed used by rule-based drivers and the speed-distribution reference.
    #[serde(default = "default_target_speed")]
    pub target_speed: f64,
}

/// A lane with cached arclength data.
#[derive(Debug, Clone)]
struct LaneGeometry {
    cumulative: Vec<f64>,
    bbox_min: Vec2,
    bbox_max: Vec2,
}

#[derive(Debug, Clone)]
pub struct LaneGraph {
    lanes: Vec<Lane>,
    geometry: Vec<LaneGeometry>,
    index: BTreeMap<LaneId, usize>,
}

impl LaneGraph {
    /// Builds and validates a lane graph. Lanes are stored in ascending id order.
    pub fn new(mut lanes: Vec<Lane>) -> Result<Self> {
        if lanes.is_empty() {
            return Err(Error::InvalidGeometry("lane graph has no lanes".into()));
        }
        lanes.sort_by_key(|l| l.id);
        let mut index = BTreeMap::new();
        for (i, lane) in lanes.iter().enumerate() {
            if index.insert(lane.id, i).is_some() {
                return Err(Error::InvalidGeometry(format!(
                    "duplicate lane id {}",
                    lane.id
                )));
            }
        }
        let mut geometry = Vec::with_capacity(lanes.len());
        for lane in &lanes {
            if lane.centerline.len() < 2 {
                return Err(Error::InvalidGeometry(format!(
                    "lane {} centerline needs at least 2 points",
                    lane.id
                )));
            }
            if lane.centerline.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGeometry(format!(
                    "lane {} has repeated consecutive points",
                    lane.id
                )));
            }
            if lane
                .centerline
                .iter()
                .any(|p| !p.x.is_finite() || !p.y.is_finite())
            {
                return Err(Error::InvalidGeometry(format!(
                    "lane {} has non-finite points",
                    lane.id
                )));
            }
            if !(lane.width > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "lane {} width must be positive, got {}",
                    lane.id, lane.width
                )));
            }
            if !(lane.target_speed > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "lane {} target speed must be positive",
                    lane.id
                )));
            }
            for r in lane
                .successors
                .iter()
                .chain(lane.left.iter())
                .chain(lane.right.iter())
            {
                if !index.contains_key(r) {
                    return Err(Error::InvalidGeometry(format!(
                        "lane {} references unknown lane {}",
                        lane.id, r
                    )));
                }
            }
            let (mut lo, mut hi) = (lane.centerline[0], lane.centerline[0]);
            for p in &lane.centerline {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            geometry.push(LaneGeometry {
                cumulative: cumulative_length(&lane.centerline),
                bbox_min: lo,
                bbox_max: hi,
            });
        }
        Ok(Self {
            lanes,
            geometry,
            index,
        })
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn lane(&self, id: LaneId) -> Option<&Lane> {
        self.index.get(&id).map(|&i| &self.lanes[i])
    }

    fn slot(&self, id: LaneId) -> Result<usize> {
        self.index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::InvalidGeometry(format!("unknown lane {id}")))
    }

    pub fn lane_length(&self, id: LaneId) -> Result<f64> {
        let i = self.slot(id)?;
        Ok(*self.geometry[i].cumulative.last().unwrap())
    }

    pub fn cumulative(&self, id: LaneId) -> Result<&[f64]> {
        Ok(&self.geometry[self.slot(id)?].cumulative)
    }

    /// Position and unit tangent at arclength `s` (clamped) along a lane.
    pub fn point_at(&self, id: LaneId, s: f64) -> Result<(Vec2, Vec2)> {
        let i = self.slot(id)?;
        Ok(point_at_arclength(
            &self.lanes[i].centerline,
            &self.geometry[i].cumulative,
            s,
        ))
    }

    /// Projects a point onto a specific lane.
    pub fn project_onto(&self, id: LaneId, p: Vec2) -> Result<crate::geom::PolylineProjection> {
        let i = self.slot(id)?;
        Ok(project_onto_polyline(
            p,
            &self.lanes[i].centerline,
            &self.geometry[i].cumulative,
        ))
    }
}

/// Nearest-lane projection of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProjection {
    pub lane: LaneId,
    pub arclength: f64,
    /// Signed lateral offset `x_f`, left of the lane direction positive.
    pub lateral_offset: f64,
    /// Heading deviation `theta_f` in (-pi, pi].
    pub heading_error: f64,
    pub distance: f64,
}

/// Projects a pose onto the nearest lane centerline (ties go to the lower lane id).
pub fn project_to_lane(graph: &LaneGraph, point: Vec2, heading: f64) -> LaneProjection {
    let mut best: Option<(usize, crate::geom::PolylineProjection)> = None;
    for (i, (lane, geo)) in graph.lanes.iter().zip(&graph.geometry).enumerate() {
        if let Some((_, b)) = &best {
            let dx = (geo.bbox_min.x - point.x)
                .max(point.x - geo.bbox_max.x)
                .max(0.0);
            let dy = (geo.bbox_min.y - point.y)
                .max(point.y - geo.bbox_max.y)
                .max(0.0);
            if dx.hypot(dy) > b.distance {
                continue;
            }
        }
        let pr = project_onto_polyline(point, &lane.centerline, &geo.cumulative);
        if best.as_ref().is_none_or(|(_, b)| pr.distance < b.distance) {
            best = Some((i, pr));
        }
    }
    let (i, pr) = best.expect("lane graph is never empty");
    LaneProjection {
        lane: graph.lanes[i].id,
        arclength: pr.arclength,
        lateral_offset: pr.lateral,
        heading_error: wrap_angle(heading - pr.tangent.heading()),
        distance: pr.distance,
    }
}

/// Like [`project_to_lane`] but only considers lanes whose direction is within 90 degrees of
/// `heading`, falling back to the plain nearest lane when none qualifies. Overlapping
/// connectors inside junctions make the unfiltered choice ambiguous.
pub fn project_to_lane_aligned(graph: &LaneGraph, point: Vec2, heading: f64) -> LaneProjection {
    let mut best: Option<LaneProjection> = None;
    for (lane, geo) in graph.lanes.iter().zip(&graph.geometry) {
        if let Some(b) = &best {
            let dx = (geo.bbox_min.x - point.x)
                .max(point.x - geo.bbox_max.x)
                .max(0.0);
            let dy = (geo.bbox_min.y - point.y)
                .max(point.y - geo.bbox_max.y)
                .max(0.0);
            if dx.hypot(dy) > b.distance {
                continue;
            }
        }
        let pr = project_onto_polyline(point, &lane.centerline, &geo.cumulative);
        let heading_error = wrap_angle(heading - pr.tangent.heading());
        if heading_error.abs() > std::f64::consts::FRAC_PI_2 {
            continue;
        }
        if best.as_ref().is_none_or(|b| pr.distance < b.distance) {
            best = Some(LaneProjection {
                lane: lane.id,
                arclength: pr.arclength,
                lateral_offset: pr.lateral,
                heading_error,
                distance: pr.distance,
            });
        }
    }
    best.unwrap_or_else(|| project_to_lane(graph, point, heading))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivableArea {
    pub polygons: Vec<Polygon>,
}

impl DrivableArea {
    pub fn new(polygons: Vec<Polygon>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::InvalidGeometry(
                "drivable area has no polygons".into(),
            ));
        }
        for (i, p) in polygons.iter().enumerate() {
            if !p.is_simple() {
                return Err(Error::InvalidGeometry(format!(
                    "drivable polygon {i} is not simple"
                )));
            }
        }
        Ok(Self { polygons })
    }
}

/// True when the point lies inside the union of drivable polygons (boundary inclusive).
pub fn in_drivable(point: Vec2, area: &DrivableArea) -> bool {
    area.polygons.iter().any(|p| p.contains(point))
}

/// A lane graph together with its drivable area.
#[derive(Debug, Clone)]
pub struct RoadMap {
    pub graph: LaneGraph,
    pub area: DrivableArea,
}

impl RoadMap {
    pub fn new(graph: LaneGraph, area: DrivableArea) -> Self {
        Self { graph, area }
    }

    /// Checks that every lane corridor lies inside the drivable area, sampling every metre
    /// (end caps are checked on the centerline only).
    pub fn validate_corridors(&self) -> Result<()> {
        for lane in self.graph.lanes() {
            let len = self.graph.lane_length(lane.id)?;
            let n = (len.ceil() as usize).max(1);
            let half = 0.5 * lane.width * (1.0 - 1e-6);
            for k in 0..=n {
                let s = len * k as f64 / n as f64;
                let (p, t) = self.graph.point_at(lane.id, s)?;
                let offsets: &[f64] = if k == 0 || k == n {
                    &[0.0]
                } else {
                    &[-half, 0.0, half]
                };
                for &off in offsets {
                    let q = p + t.perp() * off;
                    if !in_drivable(q, &self.area) {
                        return Err(Error::InvalidGeometry(format!(
                            "lane {} corridor leaves the drivable area near s = {s:.2}",
                            lane.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
