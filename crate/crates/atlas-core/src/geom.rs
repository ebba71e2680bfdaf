//! Plane geometry for floor plans: positions, axis-aligned rectangles, and
//! segment intersection tests used for wall crossings.

use serde::{Deserialize, Serialize};

/// Tolerance for collinearity and containment checks. Floor plans are
/// human-scale meters, so a nanometer slack is well below any meaningful
/// feature size.
pub const GEOM_EPS: f64 = 1e-9;

/// A point in local environment coordinates: meters on the floor plane plus a
/// floor index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub floor: i32,
}

impl Position {
    pub fn new(x: f64, y: f64, floor: i32) -> Self {
        Self { x, y, floor }
    }

    /// Straight-line distance on the floor plane, ignoring floor separation.
    pub fn planar_distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Axis-aligned rectangle, closed on all edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min_x <= self.max_x && self.min_y <= self.max_y
    }

    /// Containment including the boundary.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x - GEOM_EPS
            && x <= self.max_x + GEOM_EPS
            && y >= self.min_y - GEOM_EPS
            && y <= self.max_y + GEOM_EPS
    }

    /// True when `inner` lies entirely within `self`.
    pub fn contains_rect(&self, inner: &Rect) -> bool {
        self.contains(inner.min_x, inner.min_y) && self.contains(inner.max_x, inner.max_y)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

fn orientation(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// True when `p` lies on the segment `a`-`b` (collinear and within its
/// bounding box).
pub fn point_on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    if orientation(a, b, p).abs() > GEOM_EPS {
        return false;
    }
    p.0 >= a.0.min(b.0) - GEOM_EPS
        && p.0 <= a.0.max(b.0) + GEOM_EPS
        && p.1 >= a.1.min(b.1) - GEOM_EPS
        && p.1 <= a.1.max(b.1) + GEOM_EPS
}

/// True when segments `p1`-`p2` and `q1`-`q2` touch or cross, endpoints
/// included.
pub fn segments_intersect(
    p1: (f64, f64),
    p2: (f64, f64),
    q1: (f64, f64),
    q2: (f64, f64),
) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);

    if ((d1 > GEOM_EPS && d2 < -GEOM_EPS) || (d1 < -GEOM_EPS && d2 > GEOM_EPS))
        && ((d3 > GEOM_EPS && d4 < -GEOM_EPS) || (d3 < -GEOM_EPS && d4 > GEOM_EPS))
    {
        return true;
    }

    point_on_segment(p1, q1, q2)
        || point_on_segment(p2, q1, q2)
        || point_on_segment(q1, p1, p2)
        || point_on_segment(q2, p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_contains_boundary() {
        let r = Rect::new(0.0, 0.0, 10.0, 5.0);
        assert!(r.contains(0.0, 0.0));
        assert!(r.contains(10.0, 5.0));
        assert!(r.contains(5.0, 2.5));
        assert!(!r.contains(10.1, 2.5));
        assert!(!r.contains(-0.1, 2.5));
    }

    #[test]
    fn crossing_segments_intersect() {
        assert!(segments_intersect(
            (0.0, 0.0),
            (4.0, 4.0),
            (0.0, 4.0),
            (4.0, 0.0)
        ));
    }

    #[test]
    fn parallel_segments_do_not_intersect() {
        assert!(!segments_intersect(
            (0.0, 0.0),
            (4.0, 0.0),
            (0.0, 1.0),
            (4.0, 1.0)
        ));
    }

    #[test]
    fn touching_endpoint_counts_as_intersection() {
        assert!(segments_intersect(
            (0.0, 0.0),
            (2.0, 2.0),
            (2.0, 2.0),
            (4.0, 0.0)
        ));
    }

    #[test]
    fn collinear_disjoint_segments_do_not_intersect() {
        assert!(!segments_intersect(
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (3.0, 0.0)
        ));
    }

    #[test]
    fn point_on_segment_detects_interior_and_rejects_offset() {
        assert!(point_on_segment((1.0, 1.0), (0.0, 0.0), (2.0, 2.0)));
        assert!(!point_on_segment((1.0, 1.2), (0.0, 0.0), (2.0, 2.0)));
    }
}
