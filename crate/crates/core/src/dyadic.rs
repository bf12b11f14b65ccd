//! Dyadic cube arithmetic inside a square world window.
//!
//! A cube is identified by `(level, i, j)`; in a window with origin `o` and
//! side `W` it is the closed box
//! `[o.x + i W 2^-level, o.x + (i+1) W 2^-level] x [o.y + j W 2^-level, ...]`.
//! All combinatorial predicates (adjacency, ancestry) are evaluated in exact
//! integer arithmetic.

use std::fmt;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::geom::{sqrt_dim, Point, Rect};

/// Finest supported subdivision level.
pub const MAX_LEVEL: u8 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: u8,
    pub i: u64,
    pub j: u64,
}

impl DyadicCube {
    pub const ROOT: DyadicCube = DyadicCube { level: 0, i: 0, j: 0 };

    pub fn new(level: u8, i: u64, j: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Precondition(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        let n = 1u64 << level;
        if i >= n || j >= n {
            return Err(Error::Precondition(format!("coords ({i}, {j}) outside level {level}")));
        }
        Ok(DyadicCube { level, i, j })
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube { level: self.level - 1, i: self.i >> 1, j: self.j >> 1 })
    }

    /// The 2^n children in the order `(0,0), (1,0), (0,1), (1,1)`.
    pub fn children(&self) -> [DyadicCube; 4] {
        let l = self.level + 1;
        let (i, j) = (2 * self.i, 2 * self.j);
        [
            DyadicCube { level: l, i, j },
            DyadicCube { level: l, i: i + 1, j },
            DyadicCube { level: l, i, j: j + 1 },
            DyadicCube { level: l, i: i + 1, j: j + 1 },
        ]
    }

    /// Ancestor at a coarser (or equal) level.
    pub fn ancestor(&self, level: u8) -> DyadicCube {
        debug_assert!(level <= self.level);
        let s = self.level - level;
        DyadicCube { level, i: self.i >> s, j: self.j >> s }
    }

    /// `self ⊇ other` as closed dyadic cubes.
    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }

    /// Half-open integer extent `[lo, hi)` along each axis in units of `level`.
    pub fn extent_at(&self, level: u8) -> ((u64, u64), (u64, u64)) {
        debug_assert!(level >= self.level);
        let s = level - self.level;
        ((self.i << s, (self.i + 1) << s), (self.j << s, (self.j + 1) << s))
    }

    /// Whether the closed boxes intersect (shared faces and corners count).
    pub fn touches(&self, other: &DyadicCube) -> bool {
        let m = self.level.max(other.level);
        let ((ax0, ax1), (ay0, ay1)) = self.extent_at(m);
        let ((bx0, bx1), (by0, by1)) = other.extent_at(m);
        ax0 <= bx1 && bx0 <= ax1 && ay0 <= by1 && by0 <= ay1
    }

    /// Interiors intersect, i.e. one cube contains the other.
    pub fn overlaps(&self, other: &DyadicCube) -> bool {
        self.contains_cube(other) || other.contains_cube(self)
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.level, self.i, self.j)
    }
}

/// Square world window subdivided dyadically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub origin: Point,
    pub side: f64,
}

impl Window {
    pub fn new(origin: Point, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite() && origin.is_finite()) {
            return Err(Error::Precondition(format!("window side must be positive, got {side}")));
        }
        Ok(Window { origin, side })
    }

    /// Window centred at `center` with the given side.
    pub fn centered(center: Point, side: f64) -> Result<Self> {
        Window::new(Point::new(center.x - side / 2.0, center.y - side / 2.0), side)
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.origin, Point::new(self.origin.x + self.side, self.origin.y + self.side))
    }

    /// `ℓ(Q)` for cubes at `level`.
    pub fn side_at(&self, level: u8) -> f64 {
        self.side * (0.5f64).powi(level as i32)
    }

    pub fn cube_rect(&self, q: &DyadicCube) -> Rect {
        let s = self.side_at(q.level);
        let min = Point::new(self.origin.x + q.i as f64 * s, self.origin.y + q.j as f64 * s);
        Rect::new(min, Point::new(min.x + s, min.y + s))
    }

    pub fn center(&self, q: &DyadicCube) -> Point {
        let s = self.side_at(q.level);
        Point::new(self.origin.x + (q.i as f64 + 0.5) * s, self.origin.y + (q.j as f64 + 0.5) * s)
    }

    /// Centre, side and counter-clockwise corners starting at the lower left.
    pub fn geometry(&self, q: &DyadicCube) -> (Point, f64, [Point; 4]) {
        let r = self.cube_rect(q);
        let corners = [r.min, Point::new(r.max.x, r.min.y), r.max, Point::new(r.min.x, r.max.y)];
        (self.center(q), self.side_at(q.level), corners)
    }

    /// Cube at `level` whose half-open box contains `p`; the window's upper
    /// edges belong to the last row and column.
    pub fn cell_at(&self, p: Point, level: u8) -> Option<DyadicCube> {
        if !self.rect().contains(p) {
            return None;
        }
        let n = 1u64 << level;
        let s = self.side_at(level);
        let f = |t: f64| (((t / s).floor()) as u64).min(n - 1);
        Some(DyadicCube { level, i: f(p.x - self.origin.x), j: f(p.y - self.origin.y) })
    }

    pub fn place(&self, cube: DyadicCube) -> PlacedCube {
        PlacedCube { window: *self, cube }
    }

    /// Euclidean distance between two closed cubes.
    pub fn cube_distance(&self, a: &DyadicCube, b: &DyadicCube) -> f64 {
        self.cube_rect(a).dist_to_rect(&self.cube_rect(b))
    }

    /// Conservative containment `Q ⊂ Ω`: `sd(center) >= (√n/2) ℓ(Q) - 1e-12 W`.
    pub fn cube_in_domain(&self, domain: &Domain, q: &DyadicCube) -> bool {
        domain.signed_distance(self.center(q)) >= 0.5 * sqrt_dim() * self.side_at(q.level) - 1e-12 * self.side
    }

    /// Whether `level` subdivides the window into cells of side `h` (up to rounding).
    pub fn level_for_cell_size(&self, h: f64) -> Option<u8> {
        let ratio = self.side / h;
        let level = ratio.log2().round();
        if !(0.0..=MAX_LEVEL as f64).contains(&level) {
            return None;
        }
        ((ratio - level.exp2()).abs() <= 1e-9 * ratio).then_some(level as u8)
    }
}

/// A cube together with the window it lives in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlacedCube {
    pub window: Window,
    pub cube: DyadicCube,
}

impl PlacedCube {
    /// Closed-box adjacency; rejects cubes from different windows.
    pub fn adjacent(&self, other: &PlacedCube) -> Result<bool> {
        if self.window != other.window {
            return Err(Error::DifferentWindows);
        }
        Ok(self.cube.touches(&other.cube))
    }
}
