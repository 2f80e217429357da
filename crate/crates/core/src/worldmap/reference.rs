//! Reference lines extracted from planned lane paths.

use super::{LaneGraph, LaneId, RouteQuery};
use crate::error::Result;
use crate::geom::{cumulative_length, point_at_arclength, project_onto_polyline, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resampling interval along reference lines (m).
pub const REFERENCE_SPACING: f64 = 1.0;

const MAX_CHAIN_LANES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub x: f64,
    pub y: f64,
    /// Unwrapped heading (continuous along the line).
    pub heading: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLine {
    pub points: Vec<ReferencePoint>,
}

impl ReferenceLine {
    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| Vec2::new(p.x, p.y)).collect()
    }

    pub fn length(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }

    /// Resamples a polyline at [`REFERENCE_SPACING`] up to `max_length`.
    pub fn from_polyline(points: &[Vec2], max_length: f64) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let cum = cumulative_length(points);
        let total = cum.last().copied().unwrap_or(0.0).min(max_length);
        let count = (total / REFERENCE_SPACING + 1e-9).floor() as usize;
        if count == 0 {
            return None;
        }
        let positions: Vec<Vec2> = (0..=count)
            .map(|k| point_at_arclength(points, &cum, k as f64 * REFERENCE_SPACING).0)
            .collect();
        let n = positions.len();
        let mut headings = Vec::with_capacity(n);
        for k in 0..n {
            let a = positions[k.saturating_sub(1)];
            let b = positions[(k + 1).min(n - 1)];
            headings.push((b - a).heading());
        }
        for k in 1..n {
            let mut h = headings[k];
            while h - headings[k - 1] > PI {
                h -= 2.0 * PI;
            }
            while h - headings[k - 1] < -PI {
                h += 2.0 * PI;
            }
            headings[k] = h;
        }
        Some(Self {
            points: positions
                .iter()
                .zip(headings)
                .enumerate()
                .map(|(k, (p, heading))| ReferencePoint {
                    x: p.x,
                    y: p.y,
                    heading,
                    s: k as f64 * REFERENCE_SPACING,
                })
                .collect(),
        })
    }

    /// Position and heading at nominal arclength `s`, interpolated between samples and
    /// clamped to the ends.
    pub fn sample(&self, s: f64) -> (Vec2, f64) {
        let n = self.points.len();
        if n == 1 {
            let p = self.points[0];
            return (Vec2::new(p.x, p.y), p.heading);
        }
        let k = ((s / REFERENCE_SPACING).floor().max(0.0) as usize).min(n - 2);
        let (a, b) = (self.points[k], self.points[k + 1]);
        let t = ((s - a.s) / (b.s - a.s)).clamp(0.0, 1.0);
        (
            Vec2::new(a.x, a.y).lerp(Vec2::new(b.x, b.y), t),
            a.heading + (b.heading - a.heading) * t,
        )
    }

    /// Projects a point onto the line, returning (nominal arclength, signed lateral offset).
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let pos = self.positions();
        let cum = cumulative_length(&pos);
        let pr = project_onto_polyline(p, &pos, &cum);
        let k = pr.segment.min(pos.len() - 2);
        let chord = cum[k + 1] - cum[k];
        let t = if chord > 0.0 {
            (pr.arclength - cum[k]) / chord
        } else {
            0.0
        };
        (self.points[k].s + t * REFERENCE_SPACING, pr.lateral)
    }
}

fn lane_slice(graph: &LaneGraph, lane: LaneId, from_s: f64, out: &mut Vec<Vec2>) -> Result<f64> {
    let l = graph.lane(lane).expect("lane exists");
    let cum = graph.cumulative(lane)?;
    let (start, _) = graph.point_at(lane, from_s)?;
    push_distinct(out, start);
    for (p, c) in l.centerline.iter().zip(cum) {
        if *c > from_s + 1e-9 {
            push_distinct(out, *p);
        }
    }
    Ok(cum.last().unwrap() - from_s.min(*cum.last().unwrap()))
}

fn push_distinct(out: &mut Vec<Vec2>, p: Vec2) {
    if out.last().is_none_or(|q| q.distance(p) > 1e-9) {
        out.push(p);
    }
}

/// Follows successors from `lane` until `length` metres are covered, preferring lanes in
/// `preferred`, then the lowest successor id.
fn extend_chain(
    graph: &LaneGraph,
    mut lane: LaneId,
    mut covered: f64,
    length: f64,
    preferred: &[LaneId],
    out: &mut Vec<Vec2>,
) -> Result<()> {
    let mut guard = 0;
    while covered < length && guard < MAX_CHAIN_LANES {
        let succs = &graph.lane(lane).expect("lane exists").successors;
        let next = succs
            .iter()
            .find(|s| preferred.contains(s))
            .or_else(|| succs.iter().min())
            .copied();
        let Some(next) = next else { break };
        covered += lane_slice(graph, next, 0.0, out)?;
        lane = next;
        guard += 1;
    }
    Ok(())
}

/// Builds up to `n_ref` reference lines for a routed vehicle: the planned route first,
/// then left and right neighbour-lane alternatives where they exist.
pub fn reference_lines(
    query: &RouteQuery,
    graph: &LaneGraph,
    n_ref: usize,
    length: f64,
) -> Result<Vec<ReferenceLine>> {
    if !query.is_reachable() || query.path.is_empty() || n_ref == 0 {
        return Ok(Vec::new());
    }
    // A lane change replaces the step it leaves from.
    let kept: Vec<_> = query
        .path
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            query
                .path
                .get(i + 1)
                .is_none_or(|next| !next.via_lane_change)
        })
        .map(|(_, s)| *s)
        .collect();
    let route_lanes: Vec<LaneId> = kept.iter().map(|s| s.lane).collect();

    let mut lines = Vec::new();
    let mut pts = Vec::new();
    let mut covered = 0.0;
    for step in &kept {
        covered += lane_slice(graph, step.lane, step.entry_s, &mut pts)?;
        if covered >= length {
            break;
        }
    }
    let last = kept.last().expect("non-empty path").lane;
    extend_chain(graph, last, covered, length, &[], &mut pts)?;
    if let Some(line) = ReferenceLine::from_polyline(&pts, length) {
        lines.push(line);
    }

    let first = kept[0];
    let (anchor, _) = graph.point_at(first.lane, first.entry_s)?;
    let first_lane = graph.lane(first.lane).expect("lane exists");
    for neighbor in [first_lane.left, first_lane.right].into_iter().flatten() {
        if lines.len() >= n_ref {
            break;
        }
        let pr = graph.project_onto(neighbor, anchor)?;
        let mut pts = Vec::new();
        let covered = lane_slice(graph, neighbor, pr.arclength, &mut pts)?;
        let preferred: Vec<LaneId> = route_lanes
            .iter()
            .filter_map(|l| graph.lane(*l))
            .flat_map(|l| l.left.into_iter().chain(l.right))
            .collect();
        extend_chain(graph, neighbor, covered, length, &preferred, &mut pts)?;
        if let Some(line) = ReferenceLine::from_polyline(&pts, length) {
            lines.push(line);
        }
    }
    lines.truncate(n_ref);
    Ok(lines)
}
