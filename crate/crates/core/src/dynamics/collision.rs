use super::{VehicleShape, VehicleState};
use crate::geom::{point_segment_distance, segments_intersect, Vec2};

/// Oriented bounding box centred on the vehicle reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    /// Unit vector along the vehicle's heading.
    pub axis: Vec2,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            axis: Vec2::from_heading(heading),
            half_length: 0.5 * length,
            half_width: 0.5 * width,
        }
    }

    pub fn from_state(state: &VehicleState, shape: &VehicleShape) -> Self {
        Self::new(state.position(), state.heading, shape.length, shape.width)
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let u = self.axis * self.half_length;
        let v = self.axis.perp() * self.half_width;
        let c = self.center;
        [c + u + v, c - u + v, c - u - v, c + u - v]
    }

    /// Half-extent of the box projected on unit axis `n`.
    pub fn radius_along(&self, n: Vec2) -> f64 {
        self.half_length * self.axis.dot(n).abs() + self.half_width * self.axis.perp().dot(n).abs()
    }

    /// Half-diagonal: no point of the box is farther from the centre.
    pub fn circumradius(&self) -> f64 {
        (self.half_length * self.half_length + self.half_width * self.half_width).sqrt()
    }

    fn axes(&self) -> [Vec2; 2] {
        [self.axis, self.axis.perp()]
    }
}

/// Separating-axis overlap test; boxes that only touch count as overlapping.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let d = b.center - a.center;
    a.axes()
        .into_iter()
        .chain(b.axes())
        .all(|n| d.dot(n).abs() <= a.radius_along(n) + b.radius_along(n))
}

/// Euclidean distance between two boxes (0 when they overlap).
pub fn obb_distance(a: &Obb, b: &Obb) -> f64 {
    if obb_overlap(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let (a0, a1) = (ca[i], ca[(i + 1) % 4]);
        for j in 0..4 {
            let (b0, b1) = (cb[j], cb[(j + 1) % 4]);
            if segments_intersect(a0, a1, b0, b1) {
                return 0.0;
            }
            best = best
                .min(point_segment_distance(a0, b0, b1))
                .min(point_segment_distance(b0, a0, a1));
        }
    }
    best
}

/// Earliest time at which `b`, moving with velocity `rel_velocity` relative to `a`, first
/// touches `a`. Returns 0 when the boxes already overlap and `None` when they never meet.
pub fn time_to_contact(a: &Obb, b: &Obb, rel_velocity: Vec2) -> Option<f64> {
    let d = b.center - a.center;
    let mut enter = 0.0_f64;
    let mut exit = f64::INFINITY;
    for n in a.axes().into_iter().chain(b.axes()) {
        let reach = a.radius_along(n) + b.radius_along(n);
        let p = d.dot(n);
        let v = rel_velocity.dot(n);
        if v == 0.0 {
            if p.abs() > reach {
                return None;
            }
            continue;
        }
        let t0 = (-reach - p) / v;
        let t1 = (reach - p) / v;
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        enter = enter.max(lo);
        exit = exit.min(hi);
        if enter > exit {
            return None;
        }
    }
    Some(enter)
}
