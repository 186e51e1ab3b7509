//! Planar geometry kernel: points, segments and simple polygons in meters.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Tolerance used for boundary and degeneracy tests.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dist2(self, other: Point) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Point; 2]", into = "[Point; 2]")]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl From<[Point; 2]> for Segment {
    fn from([a, b]: [Point; 2]) -> Self {
        Segment { a, b }
    }
}

impl From<Segment> for [Point; 2] {
    fn from(s: Segment) -> Self {
        [s.a, s.b]
    }
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Closest point on the segment to `p`.
    pub fn closest_point(&self, p: Point) -> Point {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        if len2 <= EPS * EPS {
            return self.a;
        }
        let t = ((p - self.a).dot(d) / len2).clamp(0.0, 1.0);
        self.a + d * t
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.closest_point(p).dist(p)
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, other: &Segment) -> bool {
        let o1 = orientation(self.a, self.b, other.a);
        let o2 = orientation(self.a, self.b, other.b);
        let o3 = orientation(other.a, other.b, self.a);
        let o4 = orientation(other.a, other.b, self.b);

        if o1 * o2 < 0 && o3 * o4 < 0 {
            return true;
        }
        (o1 == 0 && on_segment(self.a, self.b, other.a))
            || (o2 == 0 && on_segment(self.a, self.b, other.b))
            || (o3 == 0 && on_segment(other.a, other.b, self.a))
            || (o4 == 0 && on_segment(other.a, other.b, self.b))
    }

    /// True when the segments cross at a single point interior to both.
    pub fn crosses_properly(&self, other: &Segment) -> bool {
        let o1 = orientation(self.a, self.b, other.a);
        let o2 = orientation(self.a, self.b, other.b);
        let o3 = orientation(other.a, other.b, self.a);
        let o4 = orientation(other.a, other.b, self.b);
        o1 * o2 < 0 && o3 * o4 < 0
    }
}

fn orientation(a: Point, b: Point, c: Point) -> i8 {
    let v = (b - a).cross(c - a);
    let scale = (b - a).norm().max((c - a).norm()).max(1.0);
    if v.abs() <= EPS * scale {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Simple polygon stored as an open vertex ring (last vertex is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut vertices = vertices;
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Polygon { vertices }
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        0.5 * (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid; falls back to the vertex mean for degenerate rings.
    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let a = self.signed_area();
        if n < 3 || a.abs() <= EPS {
            let s = self
                .vertices
                .iter()
                .fold(Point::default(), |acc, &p| acc + p);
            return s * (1.0 / n.max(1) as f64);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bounds(&self) -> Bounds {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Bounds { min, max }
    }

    /// Non-self-intersecting ring with at least three vertices and positive area.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 || self.area() <= EPS {
            return false;
        }
        let edges: Vec<Segment> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if edges[i].intersects(&edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn on_boundary(&self, p: Point) -> bool {
        self.edges().any(|e| e.distance_to(p) <= EPS * 10.0)
    }

    /// Closed containment test: boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        self.contains_strict(p) || self.on_boundary(p)
    }

    /// Open containment test (ray casting); boundary points are unspecified.
    pub fn contains_strict(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi.y > p.y) != (vj.y > p.y) {
                let x = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Nearest point of the closed polygon to `p` (identity for contained points).
    pub fn project(&self, p: Point) -> Point {
        if self.contains(p) {
            return p;
        }
        let mut best = self.vertices[0];
        let mut best_d = f64::INFINITY;
        for e in self.edges() {
            let c = e.closest_point(p);
            let d = c.dist2(p);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        // Nudge off the edge so the result is strictly interior for convex rings.
        let c = self.centroid();
        let nudged = best.lerp(c, 1e-9 / best.dist(c).max(1e-9));
        if self.contains(nudged) {
            nudged
        } else {
            best
        }
    }

    /// Distance from `p` to the closed polygon (zero inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.edges()
                .map(|e| e.distance_to(p))
                .fold(f64::INFINITY, f64::min)
        }
    }

    /// Minimum distance between two closed polygons.
    pub fn distance_to_polygon(&self, other: &Polygon) -> f64 {
        if self.overlaps_or_touches(other) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for e in self.edges() {
            for v in other.vertices() {
                best = best.min(e.distance_to(*v));
            }
        }
        for e in other.edges() {
            for v in self.vertices() {
                best = best.min(e.distance_to(*v));
            }
        }
        best
    }

    fn overlaps_or_touches(&self, other: &Polygon) -> bool {
        self.edges()
            .any(|a| other.edges().any(|b| a.intersects(&b)))
            || other.contains(self.vertices[0])
            || self.contains(other.vertices[0])
    }

    /// True when the interiors of the two polygons intersect.
    pub fn interiors_overlap(&self, other: &Polygon) -> bool {
        if self
            .edges()
            .any(|a| other.edges().any(|b| a.crosses_properly(&b)))
        {
            return true;
        }
        let strictly_inside = |poly: &Polygon, p: Point| !poly.on_boundary(p) && poly.contains_strict(p);
        self.vertices.iter().any(|&v| strictly_inside(other, v))
            || other.vertices.iter().any(|&v| strictly_inside(self, v))
            || strictly_inside(other, self.centroid())
            || strictly_inside(self, other.centroid())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_area_and_centroid() {
        let sq = Polygon::rectangle(0.0, 0.0, 2.0, 4.0);
        assert!((sq.area() - 8.0).abs() < 1e-12);
        assert_eq!(sq.centroid(), Point::new(1.0, 2.0));
        assert!(sq.is_simple());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bow = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ]);
        assert!(!bow.is_simple());
    }

    #[test]
    fn containment_includes_boundary() {
        let sq = Polygon::rectangle(0.0, 0.0, 1.0, 1.0);
        assert!(sq.contains(Point::new(0.5, 0.5)));
        assert!(sq.contains(Point::new(1.0, 0.3)));
        assert!(sq.contains(Point::new(0.0, 0.0)));
        assert!(!sq.contains(Point::new(1.01, 0.3)));
    }

    #[test]
    fn projection_lands_inside() {
        let sq = Polygon::rectangle(0.0, 0.0, 1.0, 1.0);
        let p = sq.project(Point::new(3.0, 0.5));
        assert!(sq.contains(p));
        assert!((p.x - 1.0).abs() < 1e-6 && (p.y - 0.5).abs() < 1e-6);
    }

    #[test]
    fn segment_crossing() {
        let a = Segment::new(Point::new(0.0, 0.0), Point::new(2.0, 2.0));
        let b = Segment::new(Point::new(0.0, 2.0), Point::new(2.0, 0.0));
        let c = Segment::new(Point::new(3.0, 0.0), Point::new(3.0, 5.0));
        assert!(a.intersects(&b));
        assert!(a.crosses_properly(&b));
        assert!(!a.intersects(&c));
    }

    #[test]
    fn adjacent_rectangles_touch_but_do_not_overlap() {
        let a = Polygon::rectangle(0.0, 0.0, 1.0, 1.0);
        let b = Polygon::rectangle(1.0, 0.0, 2.0, 1.0);
        let c = Polygon::rectangle(0.5, 0.5, 1.5, 1.5);
        assert!(!a.interiors_overlap(&b));
        assert!(a.interiors_overlap(&c));
        assert_eq!(a.distance_to_polygon(&b), 0.0);
        let far = Polygon::rectangle(3.0, 0.0, 4.0, 1.0);
        assert!((a.distance_to_polygon(&far) - 2.0).abs() < 1e-12);
    }
}
