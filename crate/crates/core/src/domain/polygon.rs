//! Polygons with holes: exact signed distance via boundary distance and
//! even-odd parity.

use crate::error::{Error, Result};
use crate::geom::{dist_point_segment, segments_intersect, Point};

#[derive(Clone, Debug)]
pub struct PolygonShape {
    /// Loop 0 is the outer boundary, the rest are holes. Loops are implicitly closed.
    loops: Vec<Vec<Point>>,
}

impl PolygonShape {
    pub fn new(outer: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let mut loops = Vec::with_capacity(1 + holes.len());
        loops.push(outer);
        loops.extend(holes);
        for (k, l) in loops.iter().enumerate() {
            if l.len() < 3 {
                return Err(Error::InvalidSpec(format!("polygon loop {k} has fewer than 3 vertices")));
            }
            if l.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidSpec(format!("polygon loop {k} has a non-finite vertex")));
            }
        }
        let shape = PolygonShape { loops };
        shape.check_simple()?;
        for (k, hole) in shape.loops.iter().enumerate().skip(1) {
            if !point_in_loop(hole[0], &shape.loops[0]) {
                return Err(Error::InvalidSpec(format!("hole {k} is not inside the outer loop")));
            }
        }
        Ok(shape)
    }

    pub fn loops(&self) -> &[Vec<Point>] {
        &self.loops
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize, Point, Point)> + '_ {
        self.loops.iter().enumerate().flat_map(|(k, l)| {
            (0..l.len()).map(move |i| (k, i, l[i], l[(i + 1) % l.len()]))
        })
    }

    /// Rejects any pair of non-adjacent edges that touch, across all loops.
    fn check_simple(&self) -> Result<()> {
        let edges: Vec<_> = self.edges().collect();
        for (a, &(ka, ia, p0, p1)) in edges.iter().enumerate() {
            for &(kb, ib, q0, q1) in &edges[a + 1..] {
                if ka == kb {
                    let n = self.loops[ka].len();
                    if ib == (ia + 1) % n || ia == (ib + 1) % n {
                        // neighbours share a vertex; only a collinear fold is illegal
                        let (shared, other_a, other_b) = if ib == (ia + 1) % n { (p1, p0, q1) } else { (p0, p1, q0) };
                        let u = other_a - shared;
                        let v = other_b - shared;
                        if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                            return Err(Error::SelfIntersection { loop_a: ka, edge_a: ia, loop_b: kb, edge_b: ib });
                        }
                        continue;
                    }
                }
                if segments_intersect(p0, p1, q0, q1) {
                    return Err(Error::SelfIntersection { loop_a: ka, edge_a: ia, loop_b: kb, edge_b: ib });
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Point) -> bool {
        self.loops.iter().filter(|l| point_in_loop(p, l)).count() % 2 == 1
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(_, _, a, b)| dist_point_segment(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        let d = self.boundary_distance(p);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }
}

/// Crossing-number test against one closed loop.
pub fn point_in_loop(p: Point, l: &[Point]) -> bool {
    let mut inside = false;
    let n = l.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (l[i], l[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
