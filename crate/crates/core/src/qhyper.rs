//! Quasi-hyperbolic lengths and distances.
//!
//! `k_Ω(x, y) = inf_γ ∫_γ ds / d_Ω(z)` is approximated by Dijkstra on an
//! 8-connected lattice of cell centres followed by continuous polyline
//! refinement. Segment integrals use adaptive midpoint quadrature; because
//! `d_Ω` is 1-Lipschitz, a piece of length `ℓ` with midpoint distance `d > ℓ/2`
//! has integral in `[2 ln(1 + ℓ/2d), -2 ln(1 - ℓ/2d)]`, which gives a rigorous
//! error bound and doubles as a clearance certificate for the segment.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::domain::Domain;
use crate::dyadic::Window;
use crate::error::{Error, Result};
use crate::geom::{Point, Rect};

/// Relative quadrature tolerance for reported lengths.
pub const DEFAULT_TOL: f64 = 1e-3;

/// Largest lattice accepted by [`MetricGraph::build`].
const MAX_CELLS: usize = 1 << 25;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Quadrature {
    pub value: f64,
    /// Rigorous bound on `|value - exact|`.
    pub error: f64,
}

#[derive(Clone, Copy)]
enum Rule {
    /// Bisect until the per-piece bound is below `tol` times the piece estimate.
    Bound(f64),
    /// Bisect until pieces are shorter than `ratio` times their midpoint distance.
    Estimate(f64),
}

fn floor_distance(domain: &Domain) -> f64 {
    let b = domain.bounding_box();
    1e-12 * b.width().max(b.height())
}

fn integrate(domain: &Domain, a: Point, b: Point, rule: Rule) -> Result<Quadrature> {
    let floor = floor_distance(domain);
    let mut q = Quadrature::default();
    let mut stack = vec![(a, b)];
    while let Some((p, r)) = stack.pop() {
        let len = p.dist(r);
        let m = p.lerp(r, 0.5);
        let d = domain.signed_distance(m);
        if d < floor {
            return Err(Error::UnboundedIntegrand(m));
        }
        if len == 0.0 {
            continue;
        }
        let u = len / (2.0 * d);
        let est = len / d;
        let bound = if u < 1.0 { -2.0 * (-u).ln_1p() - est } else { f64::INFINITY };
        let accept = match rule {
            Rule::Bound(tol) => bound <= tol * est,
            Rule::Estimate(ratio) => u < 1.0 && len <= ratio * d,
        };
        if accept {
            q.value += est;
            q.error += bound;
        } else if len < floor {
            return Err(Error::UnboundedIntegrand(m));
        } else {
            stack.push((m, r));
            stack.push((p, m));
        }
    }
    Ok(q)
}

/// `∫_{[a,b]} ds / d_Ω` with relative error bound at most `tol`.
pub fn segment_qh(domain: &Domain, a: Point, b: Point, tol: f64) -> Result<Quadrature> {
    integrate(domain, a, b, Rule::Bound(tol))
}

/// Cheap estimate used inside searches; fails iff the segment leaves Ω.
fn segment_estimate(domain: &Domain, a: Point, b: Point) -> Result<f64> {
    integrate(domain, a, b, Rule::Estimate(0.1)).map(|q| q.value)
}

/// Quasi-hyperbolic length of a polyline with a rigorous error bound.
pub fn qh_length(domain: &Domain, points: &[Point], tol: f64) -> Result<Quadrature> {
    let mut total = Quadrature::default();
    for w in points.windows(2) {
        let q = segment_qh(domain, w[0], w[1], tol)?;
        total.value += q.value;
        total.error += q.error;
    }
    Ok(total)
}

/// `j_Ω(x,y) = ½ log[(1 + |x−y|/d(x))(1 + |x−y|/d(y))]`.
pub fn j_distance(domain: &Domain, x: Point, y: Point) -> f64 {
    let r = x.dist(y);
    0.5 * ((r / domain.distance_to_boundary(x)).ln_1p() + (r / domain.distance_to_boundary(y)).ln_1p())
}

/// A curve in Ω with cached lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
    euclidean_length: f64,
    qh: Quadrature,
}

impl Polyline {
    pub fn new(domain: &Domain, points: Vec<Point>, tol: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCurve("a polyline needs at least two points".into()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite vertex {p}")));
        }
        let qh = qh_length(domain, &points, tol).map_err(|e| match e {
            Error::UnboundedIntegrand(p) => Error::InvalidCurve(format!("curve meets the boundary near {p}")),
            other => other,
        })?;
        let euclidean_length = points.windows(2).map(|w| w[0].dist(w[1])).sum();
        Ok(Polyline { points, euclidean_length, qh })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn euclidean_length(&self) -> f64 {
        self.euclidean_length
    }

    pub fn qh_length(&self) -> f64 {
        self.qh.value
    }

    pub fn qh_error(&self) -> f64 {
        self.qh.error
    }

    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        *self.points.last().expect("non-empty")
    }
}

/// Forward half of the 8-neighbourhood; the other half is its negation.
const FWD: [(i64, i64); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
const NONE: u32 = u32::MAX;

/// Lattice of cell centres with `sd > h√2`, linked to their 8 neighbours.
#[derive(Clone, Debug)]
pub struct MetricGraph {
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
    node_of_cell: Vec<u32>,
    cell_of_node: Vec<u32>,
    sd: Vec<f64>,
    /// Forward edge weights per node, `INFINITY` where absent.
    weights: Vec<[f64; 4]>,
}

#[derive(PartialEq)]
struct State {
    dist: f64,
    node: u32,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of a Dijkstra run: tentative distances and predecessor links.
pub struct Search {
    pub dist: Vec<f64>,
    pub parent: Vec<u32>,
}

impl Search {
    /// Node sequence from a source to `node`.
    pub fn path_to(&self, node: u32) -> Vec<u32> {
        let mut path = vec![node];
        let mut u = node;
        while self.parent[u as usize] != NONE {
            u = self.parent[u as usize];
            path.push(u);
        }
        path.reverse();
        path
    }
}

impl MetricGraph {
    /// Lattice of `nx × ny` cells of side `h` with lower-left corner `origin`.
    pub fn build(domain: &Domain, origin: Point, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::Precondition(format!("empty lattice ({nx} × {ny}, h = {h})")));
        }
        if nx.saturating_mul(ny) > MAX_CELLS {
            return Err(Error::Precondition(format!("lattice {nx} × {ny} exceeds {MAX_CELLS} cells")));
        }
        let threshold = h * std::f64::consts::SQRT_2;
        let center = |ix: usize, iy: usize| Point::new(origin.x + (ix as f64 + 0.5) * h, origin.y + (iy as f64 + 0.5) * h);
        let cell_sd: Vec<f64> = (0..ny)
            .into_par_iter()
            .flat_map_iter(|iy| (0..nx).map(move |ix| domain.signed_distance(center(ix, iy))))
            .collect();
        let mut node_of_cell = vec![NONE; nx * ny];
        let mut cell_of_node = Vec::new();
        let mut sd = Vec::new();
        for (c, &s) in cell_sd.iter().enumerate() {
            if s > threshold {
                node_of_cell[c] = cell_of_node.len() as u32;
                cell_of_node.push(c as u32);
                sd.push(s);
            }
        }
        let mut g = MetricGraph { origin, h, nx, ny, node_of_cell, cell_of_node, sd, weights: Vec::new() };
        g.weights = (0..g.cell_of_node.len())
            .into_par_iter()
            .map(|u| {
                let (ix, iy) = g.cell_xy(g.cell_of_node[u]);
                let p = center(ix, iy);
                FWD.map(|(dx, dy)| match g.node_at(ix as i64 + dx, iy as i64 + dy) {
                    Some(v) => segment_estimate(domain, p, g.position(v)).unwrap_or(f64::INFINITY),
                    None => f64::INFINITY,
                })
            })
            .collect();
        Ok(g)
    }

    /// Lattice aligned to multiples of `h` covering `rect`.
    pub fn over_rect(domain: &Domain, rect: Rect, h: f64) -> Result<Self> {
        let x0 = (rect.min.x / h).floor() * h;
        let y0 = (rect.min.y / h).floor() * h;
        let nx = ((rect.max.x - x0) / h).ceil().max(1.0) as usize;
        let ny = ((rect.max.y - y0) / h).ceil().max(1.0) as usize;
        MetricGraph::build(domain, Point::new(x0, y0), h, nx, ny)
    }

    /// Lattice of the cells of `window` at `level`.
    pub fn on_window(domain: &Domain, window: &Window, level: u8) -> Result<Self> {
        let n = 1usize << level;
        MetricGraph::build(domain, window.origin, window.side_at(level), n, n)
    }

    pub fn resolution(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.cell_of_node.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn cell_xy(&self, c: u32) -> (usize, usize) {
        (c as usize % self.nx, c as usize / self.nx)
    }

    pub fn node_at(&self, ix: i64, iy: i64) -> Option<u32> {
        if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        let n = self.node_of_cell[iy as usize * self.nx + ix as usize];
        (n != NONE).then_some(n)
    }

    /// Node at a cell given by its row-major index, if that cell is a node.
    pub fn node_of_cell(&self, cell: usize) -> Option<u32> {
        let n = self.node_of_cell[cell];
        (n != NONE).then_some(n)
    }

    pub fn position(&self, u: u32) -> Point {
        let (ix, iy) = self.cell_xy(self.cell_of_node[u as usize]);
        Point::new(self.origin.x + (ix as f64 + 0.5) * self.h, self.origin.y + (iy as f64 + 0.5) * self.h)
    }

    pub fn node_sd(&self, u: u32) -> f64 {
        self.sd[u as usize]
    }

    /// Lattice cell containing `p` (clamped to the lattice).
    fn cell_of_point(&self, p: Point) -> (i64, i64) {
        let f = |t: f64, n: usize| ((t / self.h).floor() as i64).clamp(0, n as i64 - 1);
        (f(p.x - self.origin.x, self.nx), f(p.y - self.origin.y, self.ny))
    }

    /// Neighbours of `u` with edge weights.
    pub fn edges(&self, u: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let (ix, iy) = self.cell_xy(self.cell_of_node[u as usize]);
        (0..8).filter_map(move |k| {
            let (dx, dy) = FWD[k % 4];
            if k < 4 {
                let v = self.node_at(ix as i64 + dx, iy as i64 + dy)?;
                Some((v, self.weights[u as usize][k]))
            } else {
                let v = self.node_at(ix as i64 - dx, iy as i64 - dy)?;
                Some((v, self.weights[v as usize][k - 4]))
            }
        })
        .filter(|(_, w)| w.is_finite())
    }

    /// Dijkstra from weighted sources. `visit` sees each node once, in order of
    /// final distance (ties by node index), and stops the search by returning `false`.
    pub fn dijkstra(&self, sources: &[(u32, f64)], mut visit: impl FnMut(u32, f64) -> bool) -> Search {
        self.dijkstra_within(sources, |_| true, &mut visit)
    }

    fn dijkstra_within(
        &self,
        sources: &[(u32, f64)],
        allowed: impl Fn(u32) -> bool,
        visit: &mut impl FnMut(u32, f64) -> bool,
    ) -> Search {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![NONE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &(s, d) in sources {
            if d < dist[s as usize] {
                dist[s as usize] = d;
                heap.push(State { dist: d, node: s });
            }
        }
        while let Some(State { dist: d, node: u }) = heap.pop() {
            if done[u as usize] || d > dist[u as usize] {
                continue;
            }
            done[u as usize] = true;
            if !visit(u, d) {
                break;
            }
            for (v, w) in self.edges(u) {
                let nd = d + w;
                if nd < dist[v as usize] && allowed(v) {
                    dist[v as usize] = nd;
                    parent[v as usize] = u;
                    heap.push(State { dist: nd, node: v });
                }
            }
        }
        Search { dist, parent }
    }

    /// Nodes joined to `p` by a segment inside Ω, with the segment's qh length.
    /// The search radius starts at `2h√2` and doubles until something attaches.
    pub fn attach(&self, domain: &Domain, p: Point) -> Vec<(u32, f64)> {
        let (cx, cy) = self.cell_of_point(p);
        let mut r = 2usize;
        loop {
            let radius = r as f64 * self.h * std::f64::consts::SQRT_2;
            let mut out = Vec::new();
            for iy in cy - r as i64..=cy + r as i64 {
                for ix in cx - r as i64..=cx + r as i64 {
                    if let Some(u) = self.node_at(ix, iy) {
                        let q = self.position(u);
                        if q.dist(p) <= radius {
                            if let Ok(w) = segment_estimate(domain, p, q) {
                                out.push((u, w));
                            }
                        }
                    }
                }
            }
            if !out.is_empty() || r >= 64 {
                return out;
            }
            r *= 2;
        }
    }

    fn component_size(&self, seeds: &[(u32, f64)]) -> usize {
        if seeds.is_empty() {
            return 0;
        }
        let mut count = 0;
        let zero: Vec<(u32, f64)> = seeds.iter().map(|&(u, _)| (u, 0.0)).collect();
        // hop-count flood: unit weights are irrelevant for reachability
        self.dijkstra(&zero, |_, _| {
            count += 1;
            true
        });
        count
    }

    /// Lattice shortest path from `x` to `y`: value and point sequence including both ends.
    pub fn shortest_path(&self, domain: &Domain, x: Point, y: Point) -> Result<(f64, Vec<Point>)> {
        let sources = self.attach(domain, x);
        let targets: HashMap<u32, f64> = self.attach(domain, y).into_iter().collect();
        let mut best = (f64::INFINITY, NONE);
        let search = self.dijkstra(&sources, |u, d| {
            if d >= best.0 {
                return false;
            }
            if let Some(w) = targets.get(&u) {
                if d + w < best.0 {
                    best = (d + w, u);
                }
            }
            true
        });
        if best.1 == NONE {
            let to: Vec<(u32, f64)> = targets.into_iter().collect();
            return Err(Error::Disconnected { from_size: self.component_size(&sources), to_size: self.component_size(&to) });
        }
        let mut pts = vec![x];
        pts.extend(search.path_to(best.1).into_iter().map(|u| self.position(u)));
        pts.push(y);
        Ok((best.0, pts))
    }
}

/// Greedy chord simplification: merge runs of vertices while the chord stays in
/// Ω and its qh length stays below `target`.
fn simplify(domain: &Domain, pts: &[Point], target: f64) -> Vec<Point> {
    let mut out = vec![pts[0]];
    let mut a = 0;
    let mut b = 1;
    while b < pts.len() {
        let c = b + 1;
        if c < pts.len() && segment_estimate(domain, pts[a], pts[c]).is_ok_and(|w| w <= target) {
            b = c;
            continue;
        }
        out.push(pts[b]);
        a = b;
        b = a + 1;
    }
    out
}

/// Inserts midpoints into segments longer than `frac` times the smaller end distance.
fn subdivide(domain: &Domain, pts: &mut Vec<Point>, frac: f64) {
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let limit = frac * domain.signed_distance(w[0]).min(domain.signed_distance(w[1]));
        let n = (w[0].dist(w[1]) / limit).ceil().clamp(1.0, 64.0) as usize;
        for k in 1..n {
            out.push(w[0].lerp(w[1], k as f64 / n as f64));
        }
        out.push(w[1]);
    }
    *pts = out;
}

const DIRS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    (0.0, 1.0),
    (-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    (-1.0, 0.0),
    (-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    (0.0, -1.0),
    (std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
];

/// Coordinate descent on interior vertices: each vertex tries eight moves and
/// halves its step when none helps. Stops once a sweep gains less than 1e-4
/// relatively twice in a row.
fn optimize(domain: &Domain, pts: &mut [Point]) {
    let n = pts.len();
    if n < 3 {
        return;
    }
    let mut seg: Vec<f64> =
        pts.windows(2).map(|w| segment_estimate(domain, w[0], w[1]).expect("input path is valid")).collect();
    let mut step: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.0 } else { 0.25 * pts[i].dist(pts[i - 1]).min(pts[i].dist(pts[i + 1])) })
        .collect();
    let mut total: f64 = seg.iter().sum();
    let mut quiet = 0;
    for _ in 0..400 {
        let before = total;
        for i in 1..n - 1 {
            if step[i] <= 1e-9 * (pts[i].dist(pts[i - 1]) + pts[i].dist(pts[i + 1])) {
                continue;
            }
            let mut best = (seg[i - 1] + seg[i], None);
            for (dx, dy) in DIRS {
                let cand = pts[i] + Point::new(dx, dy) * step[i];
                let (Ok(a), Ok(b)) = (segment_estimate(domain, pts[i - 1], cand), segment_estimate(domain, cand, pts[i + 1]))
                else {
                    continue;
                };
                if a + b < best.0 {
                    best = (a + b, Some((cand, a, b)));
                }
            }
            match best.1 {
                Some((cand, a, b)) => {
                    pts[i] = cand;
                    seg[i - 1] = a;
                    seg[i] = b;
                }
                None => step[i] *= 0.5,
            }
        }
        total = seg.iter().sum();
        if before - total < 1e-4 * total {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
}

/// Refines a valid path with fixed endpoints into a near-geodesic.
pub fn refine_path(domain: &Domain, pts: &[Point]) -> Vec<Point> {
    let mut pts = simplify(domain, pts, 0.5);
    for frac in [0.5, 0.25, 0.125] {
        subdivide(domain, &mut pts, frac);
        optimize(domain, &mut pts);
    }
    pts
}

/// Estimated quasi-hyperbolic distance with the refined curve attaining it.
#[derive(Clone, Debug)]
pub struct Geodesic {
    pub value: f64,
    pub error: f64,
    /// Lattice Dijkstra value before refinement.
    pub graph_value: f64,
    pub resolution: f64,
    pub path: Polyline,
}

fn check_inside(domain: &Domain, p: Point) -> Result<()> {
    if domain.signed_distance(p) > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{p} is not in {}", domain.label())))
    }
}

/// `k_Ω(x, y)` at lattice resolution `h`. The lattice covers the pair's bounding
/// box padded by `max(|x−y|/2, 8h)`; the padding doubles while the endpoints
/// are disconnected, up to the domain's bounding box.
pub fn qh_distance(domain: &Domain, x: Point, y: Point, h: f64) -> Result<Geodesic> {
    let bbox = domain.bounding_box();
    let mut pad = (0.5 * x.dist(y)).max(8.0 * h);
    loop {
        let rect = Rect::spanning(x, y).expanded(pad).intersection(&bbox).unwrap_or(bbox);
        match qh_distance_in(domain, x, y, h, rect) {
            Err(Error::Disconnected { .. }) if !rect.contains_rect(&bbox) => pad *= 2.0,
            other => return other,
        }
    }
}

/// `k_Ω(x, y)` with the lattice restricted to `rect`.
pub fn qh_distance_in(domain: &Domain, x: Point, y: Point, h: f64, rect: Rect) -> Result<Geodesic> {
    check_inside(domain, x)?;
    check_inside(domain, y)?;
    if x == y {
        let path = Polyline::new(domain, vec![x, y], DEFAULT_TOL)?;
        return Ok(Geodesic { value: 0.0, error: 0.0, graph_value: 0.0, resolution: h, path });
    }
    let graph = MetricGraph::over_rect(domain, rect, h)?;
    let (graph_value, mut start) = graph.shortest_path(domain, x, y)?;
    if let Ok(w) = segment_estimate(domain, x, y) {
        if w <= graph_value {
            start = vec![x, y];
        }
    }
    let path = Polyline::new(domain, refine_path(domain, &start), DEFAULT_TOL)?;
    Ok(Geodesic { value: path.qh_length(), error: path.qh_error(), graph_value, resolution: h, path })
}

/// Lattice point nearest to `x` in ring order with `sd >= lambda`.
fn interior_seed(domain: &Domain, x: Point, lambda: f64, h: f64) -> Result<Point> {
    let bbox = domain.bounding_box();
    let rings = ((bbox.width().max(bbox.height()) + x.dist(bbox.center())) / h).ceil() as i64 + 1;
    for r in 1..=rings {
        let mut best: Option<(f64, Point)> = None;
        for a in -r..=r {
            for (i, j) in [(a, -r), (a, r), (-r, a), (r, a)] {
                let p = x + Point::new(i as f64, j as f64) * h;
                if bbox.contains(p) && domain.signed_distance(p) >= lambda {
                    let d = p.dist(x);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, p));
                    }
                }
            }
        }
        if let Some((_, p)) = best {
            return Ok(p);
        }
    }
    Err(Error::InteriorSetEmpty { lambda })
}

/// `k_Ω(x, Ω_λ)` and a point of `Ω_λ` (up to `h`) attaining it.
///
/// A first pass finds some `y₀ ∈ Ω_λ`; the search is then confined to
/// `B_R(x)` with `R = max(λ k_Ω(x, y₀), |x − y₀|)`.
pub fn qh_distance_to_interior(domain: &Domain, x: Point, lambda: f64, h: f64) -> Result<(f64, Point)> {
    check_inside(domain, x)?;
    if domain.signed_distance(x) >= lambda {
        return Ok((0.0, x));
    }
    let y0 = interior_seed(domain, x, lambda, h)?;
    let k0 = qh_distance(domain, x, y0, h)?.value;
    let radius = (lambda * k0).max(x.dist(y0)) + 2.0 * h;
    let rect = Rect::square(x, radius).intersection(&domain.bounding_box()).unwrap_or(domain.bounding_box());
    let graph = MetricGraph::over_rect(domain, rect, h)?;
    nearest_interior_on(domain, &graph, x, lambda, Some(radius))
}

/// Multi-target search on a given lattice for the first node with `sd >= λ`.
pub fn nearest_interior_on(
    domain: &Domain,
    graph: &MetricGraph,
    x: Point,
    lambda: f64,
    radius: Option<f64>,
) -> Result<(f64, Point)> {
    let sources = graph.attach(domain, x);
    let mut hit = NONE;
    let inside = |v: u32| radius.is_none_or(|r| graph.position(v).dist(x) <= r);
    let search = graph.dijkstra_within(&sources, inside, &mut |u, _| {
        if graph.node_sd(u) >= lambda {
            hit = u;
            return false;
        }
        true
    });
    if hit == NONE {
        return Err(Error::InteriorSetEmpty { lambda });
    }
    let mut pts = vec![x];
    pts.extend(search.path_to(hit).into_iter().map(|u| graph.position(u)));
    let target = graph.position(hit);
    let path = Polyline::new(domain, refine_path(domain, &pts), DEFAULT_TOL)?;
    Ok((path.qh_length(), target))
}

/// `η_λ(x, y) = k_Ω(x, Ω_λ) + k_Ω(y, Ω_λ)`.
pub fn eta_lambda(domain: &Domain, x: Point, y: Point, lambda: f64, h: f64) -> Result<f64> {
    Ok(qh_distance_to_interior(domain, x, lambda, h)?.0 + qh_distance_to_interior(domain, y, lambda, h)?.0)
}

/// `k_Ω(a, ·)` at the cell centres of `window` at `level`, row-major, `NaN`
/// where the centre is outside Ω or cannot be joined to the lattice.
pub fn qh_field(domain: &Domain, a: Point, window: &Window, level: u8) -> Result<Vec<f64>> {
    check_inside(domain, a)?;
    if !window.rect().contains(a) {
        return Err(Error::Precondition(format!("source {a} outside the window")));
    }
    let graph = MetricGraph::on_window(domain, window, level)?;
    let sources = graph.attach(domain, a);
    if sources.is_empty() {
        return Err(Error::Disconnected { from_size: 0, to_size: graph.node_count() });
    }
    let search = graph.dijkstra(&sources, |_, _| true);
    let n = 1usize << level;
    let h = window.side_at(level);
    let values = (0..n * n)
        .into_par_iter()
        .map(|c| {
            if let Some(u) = graph.node_of_cell(c) {
                let d = search.dist[u as usize];
                return if d.is_finite() { d } else { f64::NAN };
            }
            let (ix, iy) = ((c % n) as i64, (c / n) as i64);
            let p = Point::new(window.origin.x + (ix as f64 + 0.5) * h, window.origin.y + (iy as f64 + 0.5) * h);
            if domain.signed_distance(p) <= 0.0 {
                return f64::NAN;
            }
            let mut best = f64::INFINITY;
            for jy in iy - 2..=iy + 2 {
                for jx in ix - 2..=ix + 2 {
                    if let Some(u) = graph.node_at(jx, jy) {
                        let d = search.dist[u as usize];
                        if d < best {
                            if let Ok(w) = segment_estimate(domain, graph.position(u), p) {
                                best = best.min(d + w);
                            }
                        }
                    }
                }
            }
            if best.is_finite() {
                best
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(values)
}
