//! Whitney decompositions of a domain and of the interior of its complement,
//! restricted to a dyadic window.
//!
//! A dyadic cell `Q` is accepted into `E` when `sd(center) >= (3/2)√n ℓ(Q)`
//! and into `E′` when `-sd(center) >= (3/2)√n ℓ(Q)`; otherwise it is split,
//! and undecided cells at `max_depth` form the frontier. Because `sd` is
//! 1-Lipschitz, every accepted cube has `dist(Q, ∂Ω) >= √n ℓ(Q)`, and the
//! rejected parent caps `dist(Q, ∂Ω) < (7/2)√n ℓ(Q)`. The three Whitney
//! conditions are re-checked on the finished decomposition anyway.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::domain::Domain;
use crate::dyadic::{DyadicCube, Window, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::geom::{sqrt_dim, Point, DIM};

/// Which open set a cube decomposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    /// `E`, cubes of Ω.
    Interior,
    /// `E′`, cubes of Ω′ = interior of the complement.
    Exterior,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Interior => "E",
            Tag::Exterior => "E'",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhitneyCube {
    pub cube: DyadicCube,
    pub tag: Tag,
    pub side: f64,
    /// Lower end of the bracket for `dist(Q, ∂Ω)`.
    pub dist_lo: f64,
    /// Upper end of the bracket for `dist(Q, ∂Ω)`.
    pub dist_hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leaf {
    Cube(usize),
    Frontier,
}

/// Cubes of `E` and `E′` inside a window, with adjacency and lookup.
#[derive(Clone, Debug)]
pub struct WhitneyDecomposition {
    window: Window,
    max_depth: u8,
    /// Sorted by cube identity, so index order is the deterministic tie-break order.
    cubes: Vec<WhitneyCube>,
    frontier: Vec<DyadicCube>,
    lookup: HashMap<DyadicCube, Leaf>,
    adjacency: Vec<Vec<usize>>,
    /// Per level, indices of `E` cubes sorted by `(i, j)`.
    interior_by_level: Vec<Vec<usize>>,
}

/// `C_{ε,n} = 5√n + 8n ε^{-2}`, the matching-distance constant.
pub fn matching_constant(epsilon: f64) -> f64 {
    5.0 * sqrt_dim() + 8.0 * DIM as f64 / (epsilon * epsilon)
}

/// Largest complement cube side for which a matching cube is guaranteed: `εδ/(16n)`.
pub fn matching_scale(epsilon: f64, delta: f64) -> f64 {
    epsilon * delta / (16.0 * DIM as f64)
}

/// Acceptance threshold factor `(3/2)√n`.
fn accept_factor() -> f64 {
    1.5 * sqrt_dim()
}

/// Classification of a single dyadic cell by the acceptance rule.
pub fn accept_rule(domain: &Domain, window: &Window, q: &DyadicCube) -> Option<Tag> {
    let s = domain.signed_distance(window.center(q));
    let t = accept_factor() * window.side_at(q.level);
    if s >= t {
        Some(Tag::Interior)
    } else if -s >= t {
        Some(Tag::Exterior)
    } else {
        None
    }
}

/// Bracket `[max(0, |sd(c)| - (√n/2)ℓ), min |sd|` over corners and centre`]` for `dist(Q, ∂Ω)`.
pub fn distance_bracket(domain: &Domain, window: &Window, q: &DyadicCube) -> (f64, f64) {
    let (c, side, corners) = window.geometry(q);
    let sc = domain.signed_distance(c).abs();
    let lo = (sc - 0.5 * sqrt_dim() * side).max(0.0);
    let hi = corners.iter().map(|&p| domain.signed_distance(p).abs()).fold(sc, f64::min);
    (lo, hi)
}

/// Builds the decomposition by recursive subdivision from the window root.
pub fn build_whitney(domain: &Domain, window: Window, max_depth: u8) -> Result<WhitneyDecomposition> {
    if max_depth > MAX_LEVEL {
        return Err(Error::Precondition(format!("max_depth {max_depth} exceeds {MAX_LEVEL}")));
    }
    let bbox = domain.bounding_box().expanded(1e-12 * window.side);
    if !bbox.contains_rect(&window.rect()) {
        return Err(Error::Precondition(format!(
            "window {:?} is not inside the bounding box of {}",
            window.rect(),
            domain.label()
        )));
    }
    let mut cubes = Vec::new();
    let mut frontier = Vec::new();
    let mut stack = vec![DyadicCube::ROOT];
    while let Some(q) = stack.pop() {
        match accept_rule(domain, &window, &q) {
            Some(tag) => {
                let (dist_lo, dist_hi) = distance_bracket(domain, &window, &q);
                cubes.push(WhitneyCube { cube: q, tag, side: window.side_at(q.level), dist_lo, dist_hi });
            }
            None if q.level == max_depth => frontier.push(q),
            None => stack.extend(q.children()),
        }
    }
    cubes.sort_by_key(|c| c.cube);
    frontier.sort();
    let mut lookup = HashMap::with_capacity(cubes.len() + frontier.len());
    for (k, c) in cubes.iter().enumerate() {
        lookup.insert(c.cube, Leaf::Cube(k));
    }
    for f in &frontier {
        lookup.insert(*f, Leaf::Frontier);
    }
    let mut interior_by_level = vec![Vec::new(); max_depth as usize + 1];
    for (k, c) in cubes.iter().enumerate() {
        if c.tag == Tag::Interior {
            interior_by_level[c.cube.level as usize].push(k);
        }
    }
    let mut dec = WhitneyDecomposition {
        window,
        max_depth,
        cubes,
        frontier,
        lookup,
        adjacency: Vec::new(),
        interior_by_level,
    };
    dec.adjacency = (0..dec.cubes.len()).into_par_iter().map(|k| dec.ring_neighbors(&dec.cubes[k].cube)).collect();
    dec.check_invariants()?;
    Ok(dec)
}

impl WhitneyDecomposition {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn max_depth(&self) -> u8 {
        self.max_depth
    }

    pub fn cubes(&self) -> &[WhitneyCube] {
        &self.cubes
    }

    pub fn interior_cubes(&self) -> impl Iterator<Item = &WhitneyCube> {
        self.cubes.iter().filter(|c| c.tag == Tag::Interior)
    }

    pub fn exterior_cubes(&self) -> impl Iterator<Item = &WhitneyCube> {
        self.cubes.iter().filter(|c| c.tag == Tag::Exterior)
    }

    pub fn frontier(&self) -> &[DyadicCube] {
        &self.frontier
    }

    /// Fraction of the window area covered by undecided frontier cells.
    pub fn frontier_fraction(&self) -> f64 {
        self.frontier.len() as f64 * 0.25f64.powi(self.max_depth as i32)
    }

    pub fn index_of(&self, q: &DyadicCube) -> Option<usize> {
        match self.lookup.get(q) {
            Some(Leaf::Cube(k)) => Some(*k),
            _ => None,
        }
    }

    pub fn get(&self, q: &DyadicCube) -> Option<&WhitneyCube> {
        self.index_of(q).map(|k| &self.cubes[k])
    }

    /// Indices of cubes adjacent to cube `k` (itself excluded), in identity order.
    pub fn neighbor_indices(&self, k: usize) -> &[usize] {
        &self.adjacency[k]
    }

    /// Leaf (cube or frontier cell) containing the finest-level cell `(fi, fj)`.
    fn locate_fine(&self, fi: u64, fj: u64) -> Option<(DyadicCube, Leaf)> {
        let m = self.max_depth;
        (0..=m).rev().find_map(|l| {
            let s = m - l;
            let q = DyadicCube { level: l, i: fi >> s, j: fj >> s };
            self.lookup.get(&q).map(|leaf| (q, *leaf))
        })
    }

    /// The cube of `E ∪ E′` containing `p` (half-open convention), if any.
    pub fn locate(&self, p: Point) -> Option<&WhitneyCube> {
        let cell = self.window.cell_at(p, self.max_depth)?;
        match self.locate_fine(cell.i, cell.j)? {
            (_, Leaf::Cube(k)) => Some(&self.cubes[k]),
            (_, Leaf::Frontier) => None,
        }
    }

    /// Tag of the leaf containing a finest-level cell; `None` for frontier cells.
    pub fn leaf_of_cell(&self, cell: &DyadicCube) -> Option<(usize, Tag)> {
        debug_assert_eq!(cell.level, self.max_depth);
        match self.locate_fine(cell.i, cell.j)? {
            (_, Leaf::Cube(k)) => Some((k, self.cubes[k].tag)),
            (_, Leaf::Frontier) => None,
        }
    }

    /// Walks the ring of finest-level cells around `q`, jumping over each leaf found.
    fn ring_neighbors(&self, q: &DyadicCube) -> Vec<usize> {
        let m = self.max_depth;
        let n = 1u64 << m;
        let ((x0, x1), (y0, y1)) = q.extent_at(m);
        let mut found = Vec::new();
        let walk_row = |y: u64, from: u64, to: u64, found: &mut Vec<usize>| {
            let mut x = from;
            while x <= to {
                let (c, leaf) = self.locate_fine(x, y).expect("leaves tile the window");
                if let Leaf::Cube(k) = leaf {
                    found.push(k);
                }
                x = x.max(c.extent_at(m).0 .1);
            }
        };
        let xa = x0.saturating_sub(1);
        let xb = x1.min(n - 1);
        if y0 > 0 {
            walk_row(y0 - 1, xa, xb, &mut found);
        }
        if y1 < n {
            walk_row(y1, xa, xb, &mut found);
        }
        let walk_col = |x: u64, from: u64, to: u64, found: &mut Vec<usize>| {
            let mut y = from;
            while y <= to {
                let (c, leaf) = self.locate_fine(x, y).expect("leaves tile the window");
                if let Leaf::Cube(k) = leaf {
                    found.push(k);
                }
                y = y.max(c.extent_at(m).1 .1);
            }
        };
        if x0 > 0 {
            walk_col(x0 - 1, y0, y1 - 1, &mut found);
        }
        if x1 < n {
            walk_col(x1, y0, y1 - 1, &mut found);
        }
        found.sort_unstable();
        found.dedup();
        found
    }

    /// Checks WC1, WC2 (on the distance bracket, tolerance `1e-9 W`) and WC3.
    pub fn check_invariants(&self) -> Result<()> {
        let tol = 1e-9 * self.window.side;
        let upper = 4.0 * sqrt_dim();
        for c in &self.cubes {
            let mut a = c.cube;
            while let Some(p) = a.parent() {
                if self.lookup.contains_key(&p) {
                    return Err(Error::WhitneyInvariant {
                        invariant: "WC1",
                        cube: c.cube,
                        detail: format!("overlaps ancestor {p}"),
                    });
                }
                a = p;
            }
            if c.dist_lo < c.side - tol || c.dist_hi > upper * c.side + tol {
                return Err(Error::WhitneyInvariant {
                    invariant: "WC2",
                    cube: c.cube,
                    detail: format!(
                        "dist(Q, ∂Ω)/ℓ(Q) bracket [{}, {}] not inside [1, {upper}]",
                        c.dist_lo / c.side,
                        c.dist_hi / c.side
                    ),
                });
            }
        }
        for (k, nbrs) in self.adjacency.iter().enumerate() {
            let a = &self.cubes[k];
            for &b in nbrs {
                let b = &self.cubes[b];
                if a.cube.level.abs_diff(b.cube.level) > 2 {
                    return Err(Error::WhitneyInvariant {
                        invariant: "WC3",
                        cube: a.cube,
                        detail: format!("adjacent to {} with side ratio {}", b.cube, a.side / b.side),
                    });
                }
            }
        }
        Ok(())
    }

    /// Measured extremes of `dist/ℓ` over all cubes, from the bracket ends.
    pub fn wc2_extremes(&self) -> (f64, f64) {
        self.cubes.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), c| {
            (lo.min(c.dist_lo / c.side), hi.max(c.dist_hi / c.side))
        })
    }

    /// Cubes whose closed boxes meet `q` (excluding `q` itself).
    pub fn neighbors(&self, q: &DyadicCube) -> Result<Vec<DyadicCube>> {
        let k = self.index_of(q).ok_or(Error::CubeNotFound(*q))?;
        Ok(self.adjacency[k].iter().map(|&m| self.cubes[m].cube).collect())
    }

    /// Matching cube with its precondition `ℓ(Q) <= εδ/(16n)` enforced.
    pub fn matching_cube(&self, q: &DyadicCube, epsilon: f64, delta: f64) -> Result<DyadicCube> {
        let side = self.window.side_at(q.level);
        let limit = matching_scale(epsilon, delta);
        if side > limit * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("ℓ(Q) = {side} exceeds εδ/(16n) = {limit}")));
        }
        self.search_matching_cube(q, epsilon)
    }

    /// Nearest `Q* ∈ E` with `1 <= ℓ(Q*)/ℓ(Q) <= 4` and `dist(Q*, Q) <= C_{ε,n} ℓ(Q)`,
    /// ties broken by coarser level, then coordinates. No scale precondition.
    pub fn search_matching_cube(&self, q: &DyadicCube, epsilon: f64) -> Result<DyadicCube> {
        match self.get(q) {
            Some(c) if c.tag == Tag::Exterior => {}
            _ => return Err(Error::CubeNotFound(*q)),
        }
        let side = self.window.side_at(q.level);
        let reach = matching_constant(epsilon) * side;
        let bound = reach * (1.0 + 1e-12);
        let rect = self.window.cube_rect(q);
        let mut best: Option<(f64, DyadicCube)> = None;
        for dl in 0..=2u8 {
            let Some(level) = q.level.checked_sub(dl) else { break };
            let s = self.window.side_at(level);
            let n = 1u64 << level;
            let cell = |t: f64| ((t / s).floor().max(0.0) as u64).min(n - 1);
            let (ilo, ihi) = (cell(rect.min.x - reach - self.window.origin.x), cell(rect.max.x + reach - self.window.origin.x));
            let (jlo, jhi) = (cell(rect.min.y - reach - self.window.origin.y), cell(rect.max.y + reach - self.window.origin.y));
            let list = &self.interior_by_level[level as usize];
            let start = list.partition_point(|&k| self.cubes[k].cube.i < ilo);
            for &k in &list[start..] {
                let c = self.cubes[k].cube;
                if c.i > ihi {
                    break;
                }
                if c.j < jlo || c.j > jhi {
                    continue;
                }
                let d = self.window.cube_rect(&c).dist_to_rect(&rect);
                if d > bound {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bc)) => d < bd || (d == bd && c < bc),
                };
                if better {
                    best = Some((d, c));
                }
            }
        }
        best.map(|(_, c)| c).ok_or(Error::NoMatch { cube: *q, search_radius: reach + 5.0 * sqrt_dim() * side })
    }

    /// A cube `S ∈ E` with `ℓ(S) >= εδ/(320n)` and `dist(S, x) < δ(1/ε + √n)`, nearest first.
    pub fn find_big_cube_near(&self, x: Point, epsilon: f64, delta: f64) -> Result<DyadicCube> {
        let min_side = epsilon * delta / (320.0 * DIM as f64);
        let max_dist = delta * (1.0 / epsilon + sqrt_dim());
        self.interior_cubes()
            .filter(|c| c.side >= min_side * (1.0 - 1e-12))
            .map(|c| (self.window.cube_rect(&c.cube).dist_to_point(x), c.cube))
            .filter(|(d, _)| *d < max_dist)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, c)| c)
            .ok_or(Error::BigCubeNotFound { point: x, min_side, max_dist })
    }

    /// Shortest Whitney chain (hop count) between the `E` cubes containing `x` and `y`.
    pub fn whitney_chain(&self, x: Point, y: Point) -> Result<Vec<DyadicCube>> {
        let start = self.interior_index_at(x)?;
        let goal = self.interior_index_at(y)?;
        let mut parent = vec![usize::MAX; self.cubes.len()];
        parent[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            if k == goal {
                break;
            }
            for &m in &self.adjacency[k] {
                if parent[m] == usize::MAX && self.cubes[m].tag == Tag::Interior {
                    parent[m] = k;
                    queue.push_back(m);
                }
            }
        }
        if parent[goal] == usize::MAX {
            return Err(Error::ChainDisconnected { from: self.cubes[start].cube, to: self.cubes[goal].cube });
        }
        let mut chain = vec![self.cubes[goal].cube];
        let mut k = goal;
        while k != start {
            k = parent[k];
            chain.push(self.cubes[k].cube);
        }
        chain.reverse();
        Ok(chain)
    }

    fn interior_index_at(&self, p: Point) -> Result<usize> {
        match self.locate(p) {
            Some(c) if c.tag == Tag::Interior => Ok(self.index_of(&c.cube).expect("located cube is indexed")),
            _ => Err(Error::PointNotCovered(p)),
        }
    }

    /// Largest `Q0 ∈ E ∪ E′` with `Q0 ⊇ Q` or `Q0 ⊆ Q`.
    pub fn comparable_cube(&self, q: &DyadicCube) -> Option<&WhitneyCube> {
        let mut a = *q;
        loop {
            if let Some(c) = self.get(&a) {
                return Some(c);
            }
            match a.parent() {
                Some(p) => a = p,
                None => break,
            }
        }
        self.cubes.iter().filter(|c| q.contains_cube(&c.cube)).min_by_key(|c| c.cube)
    }

    /// Distinct `E` cubes met by a polyline, sampled at spacing at most `step`.
    pub fn cubes_covering(&self, points: &[Point], step: f64) -> Vec<DyadicCube> {
        let mut hit = Vec::new();
        for w in points.windows(2) {
            let n = ((w[0].dist(w[1]) / step).ceil() as usize).max(1);
            for k in 0..=n {
                if let Some(c) = self.locate(w[0].lerp(w[1], k as f64 / n as f64)) {
                    if c.tag == Tag::Interior {
                        hit.push(c.cube);
                    }
                }
            }
        }
        hit.sort();
        hit.dedup();
        hit
    }
}

/// Searches for `z ∈ Q°` with `sd(z) >= ε ℓ(Q)/32`: the centre, then the annulus
/// `ℓ/8 < |z - c| < ℓ/4`, the ball `|z - c| < 3ℓ/8`, and finally a grid over `Q°`.
pub fn find_interior_point(domain: &Domain, window: &Window, q: &DyadicCube, epsilon: f64) -> Result<Point> {
    let (c, side, _) = window.geometry(q);
    let required = epsilon * side / 32.0;
    let mut best = (domain.signed_distance(c), c);
    if best.0 >= required {
        return Ok(c);
    }
    let polar = |r0: f64, r1: f64| {
        (0..8).flat_map(move |a| {
            (0..64).map(move |b| {
                let r = r0 + (r1 - r0) * (a as f64 + 0.5) / 8.0;
                let t = std::f64::consts::TAU * b as f64 / 64.0;
                c + Point::new(t.cos(), t.sin()) * r
            })
        })
    };
    let grid = (0..33).flat_map(move |a| {
        (0..33).map(move |b| {
            let o = window.cube_rect(q).min;
            o + Point::new((a as f64 + 0.5) / 33.0, (b as f64 + 0.5) / 33.0) * side
        })
    });
    let stages: [Box<dyn Iterator<Item = Point>>; 3] = [
        Box::new(polar(side / 8.0, side / 4.0)),
        Box::new(polar(0.0, 3.0 * side / 8.0)),
        Box::new(grid),
    ];
    for stage in stages {
        for z in stage {
            let s = domain.signed_distance(z);
            if s > best.0 {
                best = (s, z);
            }
        }
        if best.0 >= required {
            return Ok(best.1);
        }
    }
    Err(Error::InteriorPointNotFound { cube: *q, required, best: best.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;

    fn dom(s: &str) -> Domain {
        make_domain(&s.parse().unwrap()).unwrap()
    }

    /// Independent level sweep: a cell belongs to the decomposition iff it
    /// satisfies the acceptance rule and no ancestor does.
    fn exhaustive(domain: &Domain, window: &Window, max_depth: u8) -> (Vec<(DyadicCube, Tag)>, Vec<DyadicCube>) {
        let mut decided: HashMap<DyadicCube, bool> = HashMap::new();
        let mut cubes = Vec::new();
        let mut frontier = Vec::new();
        for level in 0..=max_depth {
            let n = 1u64 << level;
            for i in 0..n {
                for j in 0..n {
                    let q = DyadicCube { level, i, j };
                    let covered = q.parent().map(|p| decided[&p]).unwrap_or(false);
                    let rule = accept_rule(domain, window, &q);
                    if !covered {
                        if let Some(tag) = rule {
                            cubes.push((q, tag));
                        } else if level == max_depth {
                            frontier.push(q);
                        }
                    }
                    decided.insert(q, covered || rule.is_some());
                }
            }
        }
        cubes.sort();
        frontier.sort();
        (cubes, frontier)
    }

    fn histogram(cubes: &[(DyadicCube, Tag)]) -> Vec<usize> {
        let mut h = vec![0; 20];
        for (c, _) in cubes {
            h[c.level as usize] += 1;
        }
        h
    }

    #[test]
    fn half_plane_unit_window_wc2() {
        let d = dom("half_plane");
        let w = Window::new(Point::new(0.0, 0.0), 1.0).unwrap();
        let dec = build_whitney(&d, w, 10).unwrap();
        assert!(dec.interior_cubes().count() > 0);
        for c in dec.interior_cubes() {
            let exact = w.cube_rect(&c.cube).min.y;
            let ratio = exact / c.side;
            assert!((1.0..=4.0 * 2f64.sqrt()).contains(&ratio), "{} ratio {ratio}", c.cube);
        }
    }

    #[test]
    fn disk_matches_exhaustive_sweep() {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 8).unwrap();
        let (want, want_frontier) = exhaustive(&d, &w, 8);
        let got: Vec<_> = dec.cubes().iter().map(|c| (c.cube, c.tag)).collect();
        assert_eq!(histogram(&got), histogram(&want));
        assert_eq!(got, want);
        assert_eq!(dec.frontier(), want_frontier.as_slice());
    }

    #[test]
    fn interior_window_may_be_one_cube() {
        let d = dom("disk:4");
        let w = Window::centered(Point::new(0.0, 0.0), 1.0).unwrap();
        let dec = build_whitney(&d, w, 6).unwrap();
        let (want, _) = exhaustive(&d, &w, 6);
        let got: Vec<_> = dec.cubes().iter().map(|c| (c.cube, c.tag)).collect();
        assert_eq!(got, want);
        assert_eq!(got, vec![(DyadicCube::ROOT, Tag::Interior)]);
    }

    #[test]
    fn window_outside_bbox_rejected() {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 8.0).unwrap();
        assert!(matches!(build_whitney(&d, w, 4), Err(Error::Precondition(_))));
    }

    #[test]
    fn cubes_and_frontier_tile_window() {
        let d = dom("slit_disk:1,1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 9).unwrap();
        let area: f64 = dec.cubes().iter().map(|c| c.side * c.side).sum::<f64>()
            + dec.frontier().len() as f64 * w.side_at(9).powi(2);
        assert!((area - 16.0).abs() < 1e-9);
        assert!(dec.frontier_fraction() > 0.0 && dec.frontier_fraction() < 0.1);
    }

    #[test]
    fn neighbors_match_all_pairs_scan() {
        let d = dom("l_shape:2,2");
        let w = Window::new(Point::new(-1.0, -1.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 8).unwrap();
        for k in (0..dec.cubes().len()).step_by(7) {
            let q = dec.cubes()[k].cube;
            let mut want: Vec<_> = dec
                .cubes()
                .iter()
                .filter(|c| c.cube != q && w.cube_rect(&c.cube).dist_to_rect(&w.cube_rect(&q)) == 0.0)
                .map(|c| c.cube)
                .collect();
            want.sort();
            assert_eq!(dec.neighbors(&q).unwrap(), want, "{q}");
            for n in &want {
                assert!(n.level.abs_diff(q.level) <= 2);
            }
        }
        assert!(dec.neighbors(&DyadicCube::ROOT).is_err());
    }

    #[test]
    fn uniform_region_has_eight_neighbors() {
        // disk(8) seen through a 6×6 window is tiled by a 4×4 block of level-2 cubes
        let d = dom("disk:8");
        let w = Window::centered(Point::new(0.0, 0.0), 6.0).unwrap();
        let dec = build_whitney(&d, w, 4).unwrap();
        assert_eq!(dec.cubes().len(), 16);
        for i in 1..3 {
            for j in 1..3 {
                let nb = dec.neighbors(&DyadicCube { level: 2, i, j }).unwrap();
                assert_eq!(nb.len(), 8);
                assert!(nb.iter().all(|c| c.level == 2));
            }
        }
    }

    #[test]
    fn matching_constant_value() {
        let c = matching_constant(0.5);
        assert!((c - (5.0 * 2f64.sqrt() + 64.0)).abs() < 1e-12);
        assert!((c - 71.0711).abs() < 1e-4);
    }

    #[test]
    fn half_plane_matching_beats_mirror() {
        let d = dom("half_plane");
        let w = Window::new(Point::new(-4.0, -4.0), 8.0).unwrap();
        let dec = build_whitney(&d, w, 11).unwrap();
        let (eps, delta) = (0.5, 0.9);
        let limit = matching_scale(eps, delta);
        let mut checked = 0;
        for c in dec.exterior_cubes().filter(|c| c.side <= limit) {
            let m = dec.matching_cube(&c.cube, eps, delta).unwrap();
            let ms = w.side_at(m.level);
            assert!((1.0..=4.0).contains(&(ms / c.side)));
            let dist = w.cube_distance(&m, &c.cube);
            assert!(dist <= matching_constant(eps) * c.side * (1.0 + 1e-12));
            let n = 1u64 << c.cube.level;
            let mirror = DyadicCube { level: c.cube.level, i: c.cube.i, j: n - 1 - c.cube.j };
            if dec.get(&mirror).map(|x| x.tag) == Some(Tag::Interior) {
                assert!(dist <= w.cube_distance(&mirror, &c.cube));
            }
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn matching_precondition_and_exhaustive_check() {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 9).unwrap();
        let (eps, delta) = (0.5, 0.5);
        let limit = matching_scale(eps, delta);
        let big = dec.exterior_cubes().find(|c| c.side > limit).unwrap();
        assert!(matches!(dec.matching_cube(&big.cube, eps, delta), Err(Error::Precondition(_))));
        let interior = dec.interior_cubes().next().unwrap();
        assert!(dec.matching_cube(&interior.cube, eps, delta).is_err());
        let cmax = matching_constant(eps);
        for c in dec.exterior_cubes().filter(|c| c.side <= limit).step_by(5) {
            let got = dec.matching_cube(&c.cube, eps, delta).unwrap();
            let want = dec
                .interior_cubes()
                .filter(|s| (1.0..=4.0).contains(&(s.side / c.side)))
                .map(|s| (w.cube_distance(&s.cube, &c.cube), s.cube))
                .filter(|(dist, _)| *dist <= cmax * c.side * (1.0 + 1e-12))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap()
                .1;
            assert_eq!(got, want);
        }
    }

    #[test]
    fn interior_point_examples() {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let inner = w.cell_at(Point::new(0.1, 0.1), 5).unwrap();
        assert_eq!(find_interior_point(&d, &w, &inner, 0.5).unwrap(), w.center(&inner));
        // straddling cube: dense-grid maximum shows a qualifying point exists
        let q = w.cell_at(Point::new(0.9, 0.01), 4).unwrap();
        let side = w.side_at(4);
        let r = w.cube_rect(&q);
        let mut dense_max = f64::NEG_INFINITY;
        for a in 0..200 {
            for b in 0..200 {
                let z = r.min + Point::new((a as f64 + 0.5) / 200.0, (b as f64 + 0.5) / 200.0) * side;
                dense_max = dense_max.max(d.signed_distance(z));
            }
        }
        assert!(dense_max >= 0.5 * side / 32.0);
        let z = find_interior_point(&d, &w, &q, 0.5).unwrap();
        assert!(d.signed_distance(z) >= 0.5 * side / 32.0 && r.contains(z));
    }

    #[test]
    fn cusp_tip_has_no_interior_point() {
        let d = dom("cusp:4");
        let w = Window::new(Point::new(-1.0, -1.5), 2.0).unwrap();
        for level in [5u8, 7, 9] {
            let q = w.cell_at(Point::new(1e-9, 1e-9), level).unwrap();
            let side = w.side_at(level);
            let r = w.cube_rect(&q);
            let mut dense_max = f64::NEG_INFINITY;
            for a in 0..300 {
                for b in 0..300 {
                    let z = r.min + Point::new((a as f64 + 0.5) / 300.0, (b as f64 + 0.5) / 300.0) * side;
                    dense_max = dense_max.max(d.signed_distance(z));
                }
            }
            assert!(dense_max < 0.5 * side / 32.0, "level {level}");
            assert!(matches!(find_interior_point(&d, &w, &q, 0.5), Err(Error::InteriorPointNotFound { .. })));
        }
    }

    #[test]
    fn big_cube_examples() {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 9).unwrap();
        let s = dec.find_big_cube_near(Point::new(0.0, 0.0), 0.5, 0.5).unwrap();
        assert!(w.cube_rect(&s).contains(Point::new(0.0, 0.0)));

        let hp = dom("half_plane");
        let w = Window::new(Point::new(-4.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&hp, w, 12).unwrap();
        let x = Point::new(-2.0, 1e-3);
        let (eps, delta) = (0.5, 0.5);
        let got = dec.find_big_cube_near(x, eps, delta).unwrap();
        let min_side = eps * delta / 640.0;
        let max_dist = delta * (1.0 / eps + 2f64.sqrt());
        let want = dec
            .interior_cubes()
            .filter(|c| c.side >= min_side)
            .map(|c| (w.cube_rect(&c.cube).dist_to_point(x), c.cube))
            .filter(|(dd, _)| *dd < max_dist)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .unwrap()
            .1;
        assert_eq!(got, want);
    }

    #[test]
    fn big_cube_missing_near_slit_tip_for_tiny_scales() {
        let d = dom("slit_disk:1,1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 6).unwrap();
        // with a coarse decomposition nothing of the required size sits within reach
        let x = Point::new(0.5, 1e-3);
        let res = dec.find_big_cube_near(x, 1e-3, 1e-3);
        let min_side = 1e-6 / 640.0;
        let exhaustive_any = dec
            .interior_cubes()
            .any(|c| c.side >= min_side && w.cube_rect(&c.cube).dist_to_point(x) < 1e-3 * (1e3 + 2f64.sqrt()));
        assert_eq!(res.is_ok(), exhaustive_any);
    }

    /// Unit-weight Dijkstra over the E adjacency graph.
    fn dijkstra_hops(dec: &WhitneyDecomposition, a: usize, b: usize) -> usize {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut dist = vec![usize::MAX; dec.cubes().len()];
        let mut heap = BinaryHeap::from([Reverse((0usize, a))]);
        dist[a] = 0;
        while let Some(Reverse((d, k))) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            for &m in dec.neighbor_indices(k) {
                if dec.cubes()[m].tag == Tag::Interior && d + 1 < dist[m] {
                    dist[m] = d + 1;
                    heap.push(Reverse((d + 1, m)));
                }
            }
        }
        dist[b]
    }

    #[test]
    fn chain_examples() {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 9).unwrap();
        let x = Point::new(0.01, 0.01);
        assert_eq!(dec.whitney_chain(x, Point::new(0.02, 0.02)).unwrap().len(), 1);
        let k = dec.index_of(&dec.locate(x).unwrap().cube).unwrap();
        let nb = dec.cubes()[dec.neighbor_indices(k)[0]];
        assert_eq!(dec.whitney_chain(x, w.center(&nb.cube)).unwrap().len(), 2);

        let (x, y) = (Point::new(-0.5, 0.0), Point::new(0.5, 0.0));
        let chain = dec.whitney_chain(x, y).unwrap();
        let a = dec.index_of(&chain[0]).unwrap();
        let b = dec.index_of(chain.last().unwrap()).unwrap();
        assert_eq!(chain.len() - 1, dijkstra_hops(&dec, a, b));
        for pair in chain.windows(2) {
            assert!(pair[0].touches(&pair[1]));
        }
        assert!(matches!(dec.whitney_chain(Point::new(1.5, 1.5), y), Err(Error::PointNotCovered(_))));
    }

    #[test]
    fn comparable_cubes_exist_at_every_small_scale() {
        // matching-cube search on the disk with ε = 1/2, δ = 1/2
        let d = dom("disk:1");
        let w = Window::centered(Point::new(0.0, 0.0), 4.0).unwrap();
        let dec = build_whitney(&d, w, 13).unwrap();
        let (eps, delta) = (0.5, 0.5);
        for level in 4u8..=6 {
            assert!(w.side_at(level) < delta);
            let n = 1u64 << level;
            for i in 0..n {
                for j in 0..n {
                    let q = DyadicCube { level, i, j };
                    let q0 = dec.comparable_cube(&q).expect("some comparable cube");
                    assert!(q0.cube.overlaps(&q));
                    assert!(q0.side >= eps * w.side_at(level) / (160.0 * 2f64.sqrt()), "{q}");
                }
            }
        }
    }
}
