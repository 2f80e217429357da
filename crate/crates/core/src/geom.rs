//! Planar geometry helpers shared by the map, dynamics and metrics code.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `heading` (radians, counter-clockwise from +x).
    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotates by +90 degrees (left normal for a forward-pointing vector).
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Self {
        self + (other - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Closest point on segment `a`-`b` to `p`, returned as the clamped segment parameter.
pub fn segment_param(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return 0.0;
    }
    ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let t = segment_param(p, a, b);
    p.distance(a.lerp(b, t))
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    let ab = b - a;
    let ap = p - a;
    let scale = ab.norm().max(1.0);
    if ab.cross(ap).abs() > 1e-9 * scale {
        return false;
    }
    let t = ap.dot(ab);
    t >= -1e-12 && t <= ab.dot(ab) + 1e-12
}

/// A simple polygon given by its vertices in order (either orientation, not closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Self {
        Self::new(vec![
            Vec2::new(min.x, min.y),
            Vec2::new(max.x, min.y),
            Vec2::new(max.x, max.y),
            Vec2::new(min.x, max.y),
        ])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Point-in-polygon with the boundary counted as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        if self.edges().any(|(a, b)| on_segment(p, a, b)) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<(Vec2, Vec2)> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return false;
                }
            }
        }
        true
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Cumulative chord length of a polyline, starting at 0.
pub fn cumulative_length(points: &[Vec2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            acc += p.distance(points[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    pub distance: f64,
    pub arclength: f64,
    pub foot: Vec2,
    /// Unit tangent of the segment holding the foot point.
    pub tangent: Vec2,
    /// Signed lateral offset, positive to the left of the direction of travel.
    pub lateral: f64,
    pub segment: usize,
}

/// Projects `p` onto the polyline; `cumulative` must come from [`cumulative_length`].
pub fn project_onto_polyline(p: Vec2, points: &[Vec2], cumulative: &[f64]) -> PolylineProjection {
    project_onto_polyline_range(p, points, cumulative, 0, points.len().saturating_sub(1))
}

/// Like [`project_onto_polyline`] but restricted to segments `first..last`.
pub fn project_onto_polyline_range(
    p: Vec2,
    points: &[Vec2],
    cumulative: &[f64],
    first: usize,
    last: usize,
) -> PolylineProjection {
    let mut best: Option<(usize, f64, f64)> = None;
    for i in first..last.min(points.len().saturating_sub(1)) {
        let (a, b) = (points[i], points[i + 1]);
        let seg = b - a;
        let len2 = seg.dot(seg);
        if len2 == 0.0 {
            continue;
        }
        let t = ((p - a).dot(seg) / len2).clamp(0.0, 1.0);
        let off = p - a.lerp(b, t);
        let d2 = off.dot(off);
        if best.is_none_or(|(_, _, bd)| d2 < bd) {
            best = Some((i, t, d2));
        }
    }
    let best = best.map(|(i, t, d2)| {
        let (a, b) = (points[i], points[i + 1]);
        let len = (b - a).norm();
        let foot = a.lerp(b, t);
        let tangent = (b - a) * (1.0 / len);
        PolylineProjection {
            distance: d2.sqrt(),
            arclength: cumulative[i] + t * len,
            foot,
            tangent,
            lateral: tangent.cross(p - foot),
            segment: i,
        }
    });
    best.unwrap_or_else(|| {
        let foot = points.get(first).copied().unwrap_or(Vec2::ZERO);
        PolylineProjection {
            distance: p.distance(foot),
            arclength: cumulative.get(first).copied().unwrap_or(0.0),
            foot,
            tangent: Vec2::new(1.0, 0.0),
            lateral: 0.0,
            segment: first,
        }
    })
}

/// Point at arclength `s` along the polyline (clamped to its ends) and the local tangent.
pub fn point_at_arclength(points: &[Vec2], cumulative: &[f64], s: f64) -> (Vec2, Vec2) {
    let n = points.len();
    if n == 1 {
        return (points[0], Vec2::new(1.0, 0.0));
    }
    let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 2),
    };
    let a = points[idx];
    let b = points[idx + 1];
    let len = cumulative[idx + 1] - cumulative[idx];
    let t = if len > 0.0 {
        ((s - cumulative[idx]) / len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let tangent = if len > 0.0 {
        (b - a) * (1.0 / len)
    } else {
        Vec2::new(1.0, 0.0)
    };
    (a.lerp(b, t), tangent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn polygon_boundary_is_inside() {
        let sq = Polygon::rectangle(Vec2::new(0.0, 0.0), Vec2::new(2.0, 2.0));
        assert!(sq.contains(Vec2::new(1.0, 1.0)));
        assert!(sq.contains(Vec2::new(2.0, 1.0)));
        assert!(sq.contains(Vec2::new(0.0, 0.0)));
        assert!(!sq.contains(Vec2::new(2.0 + 1e-6, 1.0)));
        assert!(sq.is_simple());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ]);
        assert!(!p.is_simple());
    }

    #[test]
    fn polyline_projection_left_positive() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)];
        let cum = cumulative_length(&pts);
        let pr = project_onto_polyline(Vec2::new(3.0, 1.0), &pts, &cum);
        assert_eq!(pr.lateral, 1.0);
        assert_eq!(pr.arclength, 3.0);
        let pr = project_onto_polyline(Vec2::new(3.0, -1.0), &pts, &cum);
        assert_eq!(pr.lateral, -1.0);
    }
}
