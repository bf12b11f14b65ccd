//! Planar points, rectangles and segment helpers.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Ambient dimension of every domain handled by this crate.
pub const DIM: usize = 2;

/// `sqrt(n)` for the ambient dimension, the half-diagonal factor of unit cubes.
pub fn sqrt_dim() -> f64 {
    (DIM as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Linear interpolation `self + t (other - self)`.
    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
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

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-parallel rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn square(center: Point, half: f64) -> Self {
        Rect::new(
            Point::new(center.x - half, center.y - half),
            Point::new(center.x + half, center.y + half),
        )
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let min = Point::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y));
        let max = Point::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y));
        (min.x <= max.x && min.y <= max.y).then_some(Rect::new(min, max))
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(
            Point::new(self.min.x - margin, self.min.y - margin),
            Point::new(self.max.x + margin, self.max.y + margin),
        )
    }

    /// Smallest rectangle containing both points.
    pub fn spanning(a: Point, b: Point) -> Rect {
        Rect::new(
            Point::new(a.x.min(b.x), a.y.min(b.y)),
            Point::new(a.x.max(b.x), a.y.max(b.y)),
        )
    }

    /// Euclidean distance from `p` to the closed rectangle (0 inside).
    pub fn dist_to_point(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Euclidean distance between two closed rectangles (0 if they meet).
    pub fn dist_to_rect(&self, o: &Rect) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        dx.hypot(dy)
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Distance from `p` to the closed ray `{a + t d : t >= 0}` with `d` a unit vector.
pub fn dist_point_ray(p: Point, a: Point, d: Point) -> f64 {
    let t = (p - a).dot(d).max(0.0);
    p.dist(a + d * t)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, collinear overlaps included.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(2.0, 0.0);
        assert_eq!(dist_point_segment(Point::new(1.0, 3.0), a, b), 3.0);
        assert_eq!(dist_point_segment(Point::new(-3.0, 4.0), a, b), 5.0);
        assert_eq!(dist_point_segment(Point::new(1.0, 1.0), a, a), 2f64.sqrt());
    }

    #[test]
    fn rect_distances() {
        let r = Rect::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        let s = Rect::new(Point::new(4.0, 5.0), Point::new(6.0, 6.0));
        assert_eq!(r.dist_to_rect(&s), 5.0);
        assert_eq!(r.dist_to_point(Point::new(0.5, 0.5)), 0.0);
        assert_eq!(r.dist_to_point(Point::new(2.0, 1.0)), 1.0);
    }

    #[test]
    fn crossing_segments() {
        let o = Point::new(0.0, 0.0);
        assert!(segments_intersect(o, Point::new(1.0, 1.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)));
        assert!(!segments_intersect(o, Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)));
        // touching endpoint counts
        assert!(segments_intersect(o, Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)));
    }
}
