//! Grid functions and dyadic BMO-type norms.
//!
//! All suprema run over grid-aligned dyadic cubes of the function's window
//! ("dyadic bmo"). Cube sums come from summed-area tables, so averages are
//! O(1); oscillations need one pass over the cells of each cube.
//!
//! `bmo_λ` follows the two-part definition
//! `sup_{ℓ(Q)<λ} ⨍_Q |f − f_Q| + sup_{ℓ(Q)≥λ} ⨍_Q |f|`; both parts are reported.

use std::collections::VecDeque;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::Domain;
use crate::dyadic::{DyadicCube, Window};
use crate::error::{Error, Result};
use crate::geom::{sqrt_dim, Point};
use crate::qhyper::qh_field;
use crate::whitney::{Tag, WhitneyDecomposition};

/// Cube evaluations above which sweeps skip the coarsest levels.
const SWEEP_CAP: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Inside,
    Outside,
    Straddling,
}

/// Values on the cells of `window` at `level`, row-major (`j * n + i`).
/// Only `Inside` cells enter integrals.
#[derive(Clone, Debug)]
pub struct GridFunction {
    window: Window,
    level: u8,
    values: Vec<f64>,
    mask: Vec<CellKind>,
    sat: OnceLock<Sat>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window
            && self.level == other.level
            && self.mask == other.mask
            && self.values.iter().zip(&other.values).all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

/// Cell classification: inside when `sd(center) >= h/√2`, outside when `<= −h/√2`.
pub fn classify_cells(domain: &Domain, window: &Window, level: u8) -> Vec<CellKind> {
    let n = 1usize << level;
    let h = window.side_at(level);
    let half_diag = h / std::f64::consts::SQRT_2;
    (0..n * n)
        .into_par_iter()
        .map(|c| {
            let p = Point::new(window.origin.x + ((c % n) as f64 + 0.5) * h, window.origin.y + ((c / n) as f64 + 0.5) * h);
            let s = domain.signed_distance(p);
            if s >= half_diag {
                CellKind::Inside
            } else if s <= -half_diag {
                CellKind::Outside
            } else {
                CellKind::Straddling
            }
        })
        .collect()
}

impl GridFunction {
    pub fn from_parts(window: Window, level: u8, values: Vec<f64>, mask: Vec<CellKind>) -> Result<Self> {
        let n = 1usize << level;
        if values.len() != n * n || mask.len() != n * n {
            return Err(Error::Precondition(format!("expected {} cells, got {} values", n * n, values.len())));
        }
        if let Some(c) = (0..n * n).find(|&c| mask[c] == CellKind::Inside && !values[c].is_finite()) {
            return Err(Error::Precondition(format!("non-finite value at inside cell ({}, {})", c % n, c / n)));
        }
        Ok(GridFunction { window, level, values, mask, sat: OnceLock::new() })
    }

    /// A function defined on the whole window (every cell counts as inside).
    pub fn on_window(window: Window, level: u8, values: Vec<f64>) -> Result<Self> {
        let n = 1usize << level;
        GridFunction::from_parts(window, level, values, vec![CellKind::Inside; n * n])
    }

    /// Samples `f` at the centres of the inside cells of `domain`; other cells hold `NaN`.
    pub fn sample(domain: &Domain, window: Window, level: u8, f: impl Fn(Point) -> f64 + Sync) -> Result<Self> {
        let mask = classify_cells(domain, &window, level);
        let n = 1usize << level;
        let h = window.side_at(level);
        let values = (0..n * n)
            .into_par_iter()
            .map(|c| {
                if mask[c] == CellKind::Inside {
                    f(Point::new(window.origin.x + ((c % n) as f64 + 0.5) * h, window.origin.y + ((c / n) as f64 + 0.5) * h))
                } else {
                    f64::NAN
                }
            })
            .collect();
        GridFunction::from_parts(window, level, values, mask)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn n(&self) -> usize {
        1 << self.level
    }

    pub fn cell_size(&self) -> f64 {
        self.window.side_at(self.level)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[CellKind] {
        &self.mask
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n() + i]
    }

    pub fn cell_center(&self, c: usize) -> Point {
        let (n, h) = (self.n(), self.cell_size());
        Point::new(self.window.origin.x + ((c % n) as f64 + 0.5) * h, self.window.origin.y + ((c / n) as f64 + 0.5) * h)
    }

    /// Value at the cell containing `p`, if that cell is inside.
    pub fn at(&self, p: Point) -> Option<f64> {
        let c = self.window.cell_at(p, self.level)?;
        let k = c.j as usize * self.n() + c.i as usize;
        (self.mask[k] == CellKind::Inside).then_some(self.values[k])
    }

    /// Fraction of cells excluded from integrals as boundary-straddling.
    pub fn straddling_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&k| k == CellKind::Straddling).count() as f64 / self.mask.len() as f64
    }

    /// `a·self + b·other` cell-wise on a shared grid and mask.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        if self.window != other.window || self.level != other.level || self.mask != other.mask {
            return Err(Error::Precondition("grid functions live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        GridFunction::from_parts(self.window, self.level, values, self.mask.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        GridFunction::from_parts(self.window, self.level, values, self.mask.clone())
    }

    fn sat(&self) -> &Sat {
        self.sat.get_or_init(|| Sat::new(self))
    }

    fn check_cube(&self, q: &DyadicCube) -> Result<()> {
        if q.level > self.level {
            return Err(Error::Precondition(format!("cube {q} is finer than the grid level {}", self.level)));
        }
        Ok(())
    }

    /// Mean of the inside-cell values of `q`.
    pub fn cube_average(&self, q: &DyadicCube) -> Result<f64> {
        self.check_cube(q)?;
        let s = self.sat().cube(q, self.level);
        if s.count == 0 {
            return Err(Error::NoDefinedCells(*q));
        }
        Ok(s.sum / s.count as f64)
    }

    /// `⨍_Q |f − f_Q|` over inside cells.
    pub fn cube_oscillation(&self, q: &DyadicCube) -> Result<f64> {
        let mean = self.cube_average(q)?;
        Ok(self.deviation(q, mean))
    }

    fn deviation(&self, q: &DyadicCube, mean: f64) -> f64 {
        let n = self.n();
        let ((x0, x1), (y0, y1)) = q.extent_at(self.level);
        let (mut total, mut count) = (0.0, 0usize);
        for j in y0 as usize..y1 as usize {
            for i in x0 as usize..x1 as usize {
                let c = j * n + i;
                if self.mask[c] == CellKind::Inside {
                    total += (self.values[c] - mean).abs();
                    count += 1;
                }
            }
        }
        total / count as f64
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct CubeSums {
    sum: f64,
    abs: f64,
    count: u64,
}

/// Summed-area tables of values, absolute values and inside-cell counts.
#[derive(Clone, Debug)]
struct Sat {
    stride: usize,
    sum: Vec<f64>,
    abs: Vec<f64>,
    count: Vec<u64>,
}

impl Sat {
    fn new(f: &GridFunction) -> Self {
        let n = f.n();
        let stride = n + 1;
        let mut sum = vec![0.0; stride * stride];
        let mut abs = vec![0.0; stride * stride];
        let mut count = vec![0u64; stride * stride];
        for j in 0..n {
            for i in 0..n {
                let c = j * n + i;
                let (v, a, k) = if f.mask[c] == CellKind::Inside { (f.values[c], f.values[c].abs(), 1) } else { (0.0, 0.0, 0) };
                let (here, left, below, diag) = ((j + 1) * stride + i + 1, (j + 1) * stride + i, j * stride + i + 1, j * stride + i);
                sum[here] = v + sum[left] + sum[below] - sum[diag];
                abs[here] = a + abs[left] + abs[below] - abs[diag];
                count[here] = k + count[left] + count[below] - count[diag];
            }
        }
        Sat { stride, sum, abs, count }
    }

    fn cube(&self, q: &DyadicCube, level: u8) -> CubeSums {
        let ((x0, x1), (y0, y1)) = q.extent_at(level);
        let (x0, x1, y0, y1) = (x0 as usize, x1 as usize, y0 as usize, y1 as usize);
        let s = self.stride;
        let rect = |t: &[f64]| t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0];
        CubeSums {
            sum: rect(&self.sum),
            abs: rect(&self.abs),
            count: self.count[y1 * s + x1] + self.count[y0 * s + x0] - self.count[y0 * s + x1] - self.count[y1 * s + x0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub value: f64,
    /// Oscillation supremum over the small (or all, for BMO) cubes.
    pub small_scale_part: f64,
    /// Supremum of `⨍|f|` over cubes with `ℓ(Q) >= λ`.
    pub large_scale_part: f64,
    pub attaining_cube: Option<DyadicCube>,
    pub lambda: Option<f64>,
    /// No admissible cube of side `>= λ`: the value is the homogeneous part only.
    pub degenerate: bool,
    /// Fraction of the window's cells excluded as straddling the boundary.
    pub excluded_fraction: f64,
    pub cubes_swept: usize,
    /// Coarsest levels skipped to respect the sweep cap.
    pub subsampled: bool,
    /// Value is the double-cube surrogate of the local-to-global criterion.
    pub surrogate: bool,
    /// `(a_f, b_f, c_f)` of the dyadic decomposition lemma.
    pub abc: Option<(f64, f64, f64)>,
}

#[derive(Clone, Copy, Debug)]
struct CubeStat {
    cube: DyadicCube,
    side: f64,
    osc: Option<f64>,
    abs_mean: f64,
}

/// Running maximum with the cube-order tie-break.
#[derive(Clone, Copy, Debug, Default)]
struct Best {
    value: f64,
    cube: Option<DyadicCube>,
}

impl Best {
    fn offer(&mut self, value: f64, cube: DyadicCube) {
        let better = match self.cube {
            None => true,
            Some(c) => value > self.value || (value == self.value && cube < c),
        };
        if better {
            *self = Best { value, cube: Some(cube) };
        }
    }
}

/// Evaluates every admissible cube of the grid. `want_osc(side)` selects cubes
/// whose oscillation is needed.
fn sweep(
    f: &GridFunction,
    admissible: impl Fn(&DyadicCube) -> bool + Sync,
    want_osc: impl Fn(f64) -> bool + Sync,
) -> (Vec<CubeStat>, bool) {
    let sat = f.sat();
    let mut first = 0u8;
    while (first..=f.level).map(|l| 1usize << (2 * l as usize)).sum::<usize>() > SWEEP_CAP {
        first += 1;
    }
    let stats = (first..=f.level)
        .into_par_iter()
        .flat_map_iter(|level| {
            let n = 1u64 << level;
            let side = f.window.side_at(level);
            let sat = &sat;
            let admissible = &admissible;
            let want_osc = &want_osc;
            (0..n).flat_map(move |j| (0..n).map(move |i| DyadicCube { level, i, j })).filter_map(move |q| {
                if !admissible(&q) {
                    return None;
                }
                let s = sat.cube(&q, f.level);
                if s.count == 0 {
                    return None;
                }
                let mean = s.sum / s.count as f64;
                let osc = want_osc(side).then(|| f.deviation(&q, mean));
                Some(CubeStat { cube: q, side, osc, abs_mean: s.abs / s.count as f64 })
            })
        })
        .collect();
    (stats, first > 0)
}

fn base_report(f: &GridFunction, lambda: Option<f64>, cubes_swept: usize, subsampled: bool) -> NormReport {
    NormReport {
        value: 0.0,
        small_scale_part: 0.0,
        large_scale_part: 0.0,
        attaining_cube: None,
        lambda,
        degenerate: false,
        excluded_fraction: f.straddling_fraction(),
        cubes_swept,
        subsampled,
        surrogate: false,
        abc: None,
    }
}

fn lambda_report(f: &GridFunction, lambda: f64, admissible: impl Fn(&DyadicCube) -> bool + Sync) -> Result<NormReport> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!("lambda must be positive, got {lambda}")));
    }
    let (stats, subsampled) = sweep(f, admissible, |side| side < lambda);
    let (mut small, mut large) = (Best::default(), Best::default());
    let mut any_large = false;
    for s in &stats {
        match s.osc {
            Some(o) => small.offer(o, s.cube),
            None => {
                any_large = true;
                large.offer(s.abs_mean, s.cube);
            }
        }
    }
    let mut r = base_report(f, Some(lambda), stats.len(), subsampled);
    r.small_scale_part = small.value;
    r.large_scale_part = large.value;
    r.value = small.value + large.value;
    r.degenerate = !any_large;
    r.attaining_cube = if large.value > small.value { large.cube } else { small.cube.or(large.cube) };
    if r.degenerate {
        // every admissible cube is small, so the sweep already is the homogeneous norm
        r.large_scale_part = 0.0;
    }
    Ok(r)
}

/// `‖f‖_{bmo_λ(Ω)}` over dyadic cubes `Q ⊂ Ω` of the function's window.
pub fn bmo_lambda_norm(f: &GridFunction, domain: &Domain, lambda: f64) -> Result<NormReport> {
    let w = f.window;
    lambda_report(f, lambda, |q| w.cube_in_domain(domain, q))
}

/// `bmo_λ` of the window itself: every dyadic cube with at least one defined cell.
pub fn bmo_lambda_window(f: &GridFunction, lambda: f64) -> Result<NormReport> {
    lambda_report(f, lambda, |_| true)
}

fn homogeneous(f: &GridFunction, admissible: impl Fn(&DyadicCube) -> bool + Sync) -> NormReport {
    let (stats, subsampled) = sweep(f, admissible, |_| true);
    let mut best = Best::default();
    for s in &stats {
        best.offer(s.osc.expect("all oscillations requested"), s.cube);
    }
    let mut r = base_report(f, None, stats.len(), subsampled);
    r.value = best.value;
    r.small_scale_part = best.value;
    r.attaining_cube = best.cube;
    r
}

/// `‖f‖_{BMO(Ω)}` over dyadic cubes `Q ⊂ Ω`.
pub fn bmo_homogeneous_norm(f: &GridFunction, domain: &Domain) -> NormReport {
    let w = f.window;
    homogeneous(f, |q| w.cube_in_domain(domain, q))
}

/// Cube surrogate of the local criterion: oscillation sup over dyadic `Q`
/// whose concentric double `2Q` lies in Ω.
pub fn bmo_local_surrogate(f: &GridFunction, domain: &Domain) -> NormReport {
    let w = f.window;
    let mut r = homogeneous(f, |q| domain.signed_distance(w.center(q)) >= sqrt_dim() * w.side_at(q.level));
    r.surrogate = true;
    r
}

/// `a_f`, `b_f`, `c_f` on the window, with the direct dyadic `bmo_λ` sweep as the value.
pub fn bmo_rn_abc(f: &GridFunction, lambda: f64) -> Result<NormReport> {
    let mut r = bmo_lambda_window(f, lambda)?;
    let c_scale = lambda / (16.0 * sqrt_dim());
    let (stats, _) = sweep(f, |_| true, |_| true);
    let (mut a, mut c) = (0.0f64, 0.0f64);
    for s in &stats {
        a = a.max(s.osc.expect("requested"));
        if s.side >= c_scale {
            c = c.max(s.abs_mean);
        }
    }
    let mut b = 0.0f64;
    for level in 0..=f.level {
        let n = 1i64 << level;
        for j in 0..n {
            for i in 0..n {
                let q = DyadicCube { level, i: i as u64, j: j as u64 };
                let Ok(fq) = f.cube_average(&q) else { continue };
                for (di, dj) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                    let (pi, pj) = (i + di, j + dj);
                    if pi < 0 || pj < 0 || pi >= n || pj >= n {
                        continue;
                    }
                    if let Ok(fp) = f.cube_average(&DyadicCube { level, i: pi as u64, j: pj as u64 }) {
                        b = b.max((fq - fp).abs());
                    }
                }
            }
        }
    }
    r.abc = Some((a, b, c));
    Ok(r)
}

/// `k_Ω(a, ·)` sampled on the inside cells of `window` at `level`.
pub fn gen_qh_function(domain: &Domain, a: Point, window: Window, level: u8) -> Result<GridFunction> {
    let field = qh_field(domain, a, &window, level)?;
    let mask = classify_cells(domain, &window, level);
    let mut mask = mask;
    for (k, v) in mask.iter_mut().zip(&field) {
        // inside cells the lattice could not reach are excluded like straddling ones
        if *k == CellKind::Inside && !v.is_finite() {
            *k = CellKind::Straddling;
        }
    }
    let values = field.iter().zip(&mask).map(|(&v, &k)| if k == CellKind::Inside { v } else { f64::NAN }).collect();
    GridFunction::from_parts(window, level, values, mask)
}

/// `max(R₁ − k(z₁,·), 0) − max(R₂ − k(z₂,·), 0)`.
pub fn gen_dipole(domain: &Domain, z1: Point, z2: Point, r1: f64, r2: f64, window: Window, level: u8) -> Result<GridFunction> {
    if r1 < 0.0 || r2 < 0.0 {
        return Err(Error::Precondition("dipole radii must be non-negative".into()));
    }
    let mask = classify_cells(domain, &window, level);
    let bump = |z: Point, r: f64| -> Result<Vec<f64>> {
        if r == 0.0 {
            return Ok(vec![0.0; mask.len()]);
        }
        Ok(qh_field(domain, z, &window, level)?.into_iter().map(|k| if k.is_finite() { (r - k).max(0.0) } else { 0.0 }).collect())
    };
    let (f1, f2) = (bump(z1, r1)?, bump(z2, r2)?);
    let values =
        (0..mask.len()).map(|c| if mask[c] == CellKind::Inside { f1[c] - f2[c] } else { f64::NAN }).collect();
    GridFunction::from_parts(window, level, values, mask)
}

fn check_compatible(f: &GridFunction, dec: &WhitneyDecomposition) -> Result<()> {
    if f.window != dec.window() || dec.max_depth() > f.level {
        return Err(Error::Precondition("decomposition and grid function use different grids".into()));
    }
    Ok(())
}

/// `max_{Q ∈ E} |f_Q| / (1 + log₊(λ/ℓ(Q)))`.
pub fn check_log_growth(f: &GridFunction, dec: &WhitneyDecomposition, lambda: f64) -> Result<f64> {
    check_compatible(f, dec)?;
    Ok(dec
        .interior_cubes()
        .filter_map(|c| f.cube_average(&c.cube).ok().map(|m| m.abs() / (1.0 + (lambda / c.side).ln().max(0.0))))
        .fold(0.0, f64::max))
}

/// `max |f_{Q₁} − f_{Q₂}|` over adjacent Whitney cubes of Ω.
pub fn check_adjacent_averages(f: &GridFunction, dec: &WhitneyDecomposition) -> Result<f64> {
    check_compatible(f, dec)?;
    let means: Vec<Option<f64>> = dec.cubes().iter().map(|c| f.cube_average(&c.cube).ok()).collect();
    let mut worst = 0.0f64;
    for (k, c) in dec.cubes().iter().enumerate() {
        if c.tag != Tag::Interior {
            continue;
        }
        for &m in dec.neighbor_indices(k) {
            if m > k && dec.cubes()[m].tag == Tag::Interior {
                if let (Some(a), Some(b)) = (means[k], means[m]) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Cell-wise constant function on Whitney cubes: `A sin(ω·hops + φ)` with hop
/// distance from the cube containing `seed_point`. Inside cells outside every
/// `E` cube copy a neighbouring cube's value.
pub fn gen_whitney_wave(
    domain: &Domain,
    dec: &WhitneyDecomposition,
    level: u8,
    seed_point: Point,
    amplitude: f64,
    omega: f64,
    phase: f64,
) -> Result<GridFunction> {
    let window = dec.window();
    if dec.max_depth() != level {
        return Err(Error::Precondition("wave needs the decomposition at the grid level".into()));
    }
    let start = dec.locate(seed_point).filter(|c| c.tag == Tag::Interior).ok_or(Error::PointNotCovered(seed_point))?;
    let start = dec.index_of(&start.cube).expect("located");
    let mut hops = vec![usize::MAX; dec.cubes().len()];
    hops[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(k) = queue.pop_front() {
        for &m in dec.neighbor_indices(k) {
            if hops[m] == usize::MAX && dec.cubes()[m].tag == Tag::Interior {
                hops[m] = hops[k] + 1;
                queue.push_back(m);
            }
        }
    }
    let wave = |k: usize| if hops[k] == usize::MAX { 0.0 } else { amplitude * (omega * hops[k] as f64 + phase).sin() };
    let mask = classify_cells(domain, &window, level);
    let n = 1i64 << level;
    let leaf = |i: i64, j: i64| -> Option<usize> {
        if i < 0 || j < 0 || i >= n || j >= n {
            return None;
        }
        match dec.leaf_of_cell(&DyadicCube { level, i: i as u64, j: j as u64 }) {
            Some((k, Tag::Interior)) => Some(k),
            _ => None,
        }
    };
    let values = (0..mask.len())
        .map(|c| {
            if mask[c] != CellKind::Inside {
                return f64::NAN;
            }
            let (i, j) = ((c as i64) % n, (c as i64) / n);
            (0..=2)
                .find_map(|r| {
                    (-r..=r).flat_map(|dj| (-r..=r).map(move |di| (di, dj))).find_map(|(di, dj)| leaf(i + di, j + dj))
                })
                .map(wave)
                .unwrap_or(0.0)
        })
        .collect();
    GridFunction::from_parts(window, level, values, mask)
}

/// The 20-function test suite on `domain` (built for the unit disk): constants,
/// polynomials, quasi-hyperbolic distance functions, dipoles, a jump, `log d_Ω`
/// and five random Whitney waves with unit adjacent oscillation.
pub fn test_suite(
    domain: &Domain,
    dec: &WhitneyDecomposition,
    level: u8,
    seed: u64,
) -> Result<Vec<(String, GridFunction)>> {
    let w = dec.window();
    let mut suite: Vec<(String, GridFunction)> = Vec::new();
    let mut push = |name: String, f: GridFunction| suite.push((name, f));
    push("const(1)".into(), GridFunction::sample(domain, w, level, |_| 1.0)?);
    push("const(-3)".into(), GridFunction::sample(domain, w, level, |_| -3.0)?);
    push("x".into(), GridFunction::sample(domain, w, level, |p| p.x)?);
    push("x+2y".into(), GridFunction::sample(domain, w, level, |p| p.x + 2.0 * p.y)?);
    push("x^2-y^2".into(), GridFunction::sample(domain, w, level, |p| p.x * p.x - p.y * p.y)?);
    for d in [1.0, 0.5, 0.25, 0.1, 0.02] {
        let a = Point::new(1.0 - d, 0.0);
        push(format!("k(a,.) d(a)={d}"), gen_qh_function(domain, a, w, level)?);
    }
    for (z1, z2, r1, r2) in [
        (Point::new(0.9, 0.0), Point::new(-0.5, 0.0), 5.0, 0.0),
        (Point::new(0.5, 0.5), Point::new(-0.5, -0.5), 2.0, 2.0),
        (Point::new(0.0, 0.95), Point::new(0.0, -0.95), 3.0, 3.0),
    ] {
        push(format!("dipole({z1},{z2},{r1},{r2})"), gen_dipole(domain, z1, z2, r1, r2, w, level)?);
    }
    push(
        "sign(y-x)".into(),
        GridFunction::sample(domain, w, level, |p| {
            let t = p.y - p.x;
            if t == 0.0 {
                0.0
            } else {
                t.signum()
            }
        })?,
    );
    push("log d".into(), GridFunction::sample(domain, w, level, |p| domain.distance_to_boundary(p).ln())?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..5 {
        let omega = rng.gen_range(0.2..1.5);
        let amplitude = rng.gen_range(0.5..1.0) / omega;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let f = gen_whitney_wave(domain, dec, level, Point::new(0.0, 0.0), amplitude, omega, phase)?;
        push(format!("wave{k}(A={amplitude:.3},w={omega:.3})"), f);
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;
    use crate::whitney::build_whitney;
    use proptest::prelude::*;
    use rand::Rng;

    fn disk() -> Domain {
        make_domain(&"disk:1".parse().unwrap()).unwrap()
    }

    fn unit_window() -> Window {
        Window::centered(Point::new(0.0, 0.0), 2.0).unwrap()
    }

    /// Direct summation over the cells of a cube, in column-major order.
    fn oracle_mean(f: &GridFunction, q: &DyadicCube) -> f64 {
        let ((x0, x1), (y0, y1)) = q.extent_at(f.level());
        let mut vals = Vec::new();
        for i in x0..x1 {
            for j in y0..y1 {
                let c = j as usize * f.n() + i as usize;
                if f.mask()[c] == CellKind::Inside {
                    vals.push(f.values()[c]);
                }
            }
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    fn random_dyadic(level: u8, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1usize << level;
        let values = (0..n * n).map(|_| rng.gen_range(-4096i32..4096) as f64 / 1024.0).collect();
        GridFunction::on_window(unit_window(), level, values).unwrap()
    }

    #[test]
    fn averages_of_simple_functions() {
        let d = disk();
        let w = unit_window();
        let five = GridFunction::sample(&d, w, 7, |_| 5.0).unwrap();
        let q = w.cell_at(Point::new(0.1, 0.1), 3).unwrap();
        assert_eq!(five.cube_average(&q).unwrap(), 5.0);
        assert_eq!(five.cube_oscillation(&q).unwrap(), 0.0);
        let x = GridFunction::sample(&d, w, 7, |p| p.x).unwrap();
        let q = w.cell_at(Point::new(0.3, 0.1), 3).unwrap();
        assert!((w.center(&q).x - 0.375).abs() < 1e-15);
        assert!((x.cube_average(&q).unwrap() - 0.375).abs() <= x.cell_size());
        let outside = w.cell_at(Point::new(0.95, 0.95), 5).unwrap();
        assert!(matches!(x.cube_average(&outside), Err(Error::NoDefinedCells(_))));
    }

    #[test]
    fn averages_match_direct_summation_exactly() {
        let f = random_dyadic(6, 9);
        for level in 0..=6u8 {
            let n = 1u64 << level;
            for i in (0..n).step_by(3) {
                for j in (0..n).step_by(5) {
                    let q = DyadicCube { level, i, j };
                    assert_eq!(f.cube_average(&q).unwrap(), oracle_mean(&f, &q));
                }
            }
        }
    }

    #[test]
    fn oscillation_examples() {
        let w = unit_window();
        let level = 4;
        let n = 1usize << level;
        let values = (0..n * n).map(|c| if c % n < n / 2 { 1.0 } else { -1.0 }).collect();
        let f = GridFunction::on_window(w, level, values).unwrap();
        assert_eq!(f.cube_oscillation(&DyadicCube::ROOT).unwrap(), 1.0);
        let g = random_dyadic(5, 2);
        let q = DyadicCube { level: 2, i: 1, j: 3 };
        let mean = oracle_mean(&g, &q);
        let ((x0, x1), (y0, y1)) = q.extent_at(5);
        let mut dev = 0.0;
        for i in x0..x1 {
            for j in y0..y1 {
                dev += (g.value(i as usize, j as usize) - mean).abs();
            }
        }
        assert!((g.cube_oscillation(&q).unwrap() - dev / ((x1 - x0) * (y1 - y0)) as f64).abs() < 1e-12);
    }

    #[test]
    fn norms_of_constants() {
        let d = disk();
        let c = GridFunction::sample(&d, unit_window(), 7, |_| -2.5).unwrap();
        let r = bmo_lambda_norm(&c, &d, 0.25).unwrap();
        assert_eq!((r.small_scale_part, r.large_scale_part, r.value), (0.0, 2.5, 2.5));
        assert!(!r.degenerate && r.excluded_fraction > 0.0);
        assert_eq!(bmo_homogeneous_norm(&c, &d).value, 0.0);
        let r = bmo_lambda_norm(&c, &d, 3.0).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.value, 0.0);
        assert!(bmo_lambda_norm(&c, &d, 0.0).is_err());
    }

    #[test]
    fn sign_function_oscillates() {
        let d = disk();
        let f = GridFunction::sample(&d, unit_window(), 8, |p| {
            let t = p.y - p.x;
            if t == 0.0 {
                0.0
            } else {
                t.signum()
            }
        })
        .unwrap();
        assert!(bmo_homogeneous_norm(&f, &d).value >= 0.9);
    }

    #[test]
    fn translation_and_scaling() {
        let d = disk();
        let f = GridFunction::sample(&d, unit_window(), 6, |p| ((7.0 * p.x).sin() * 1024.0).round() / 1024.0).unwrap();
        let base = bmo_homogeneous_norm(&f, &d).value;
        assert_eq!(bmo_homogeneous_norm(&f.map(|v| v + 3.0).unwrap(), &d).value, base);
        assert_eq!(bmo_homogeneous_norm(&f.map(|v| -4.0 * v).unwrap(), &d).value, 4.0 * base);
        let r = bmo_lambda_norm(&f, &d, 0.25).unwrap();
        let r4 = bmo_lambda_norm(&f.map(|v| 0.25 * v).unwrap(), &d, 0.25).unwrap();
        assert_eq!(r4.large_scale_part, 0.25 * r.large_scale_part);
        assert_eq!(r4.small_scale_part, 0.25 * r.small_scale_part);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn homogeneity(t in -8.0f64..8.0, seed in 0u64..1000) {
            let f = random_dyadic(4, seed);
            let d = disk();
            let a = bmo_homogeneous_norm(&f, &d).value;
            let b = bmo_homogeneous_norm(&f.map(|v| t * v).unwrap(), &d).value;
            prop_assert!((b - t.abs() * a).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn bmo_at_most_twice_bmo_lambda(seed in 0u64..1000, lambda in 0.05f64..1.5) {
            let f = random_dyadic(4, seed);
            let d = disk();
            let g = GridFunction::from_parts(f.window(), 4, f.values().to_vec(), classify_cells(&d, &f.window(), 4)).unwrap();
            let g = g.map(|v| v).unwrap();
            let bmo = bmo_homogeneous_norm(&g, &d).value;
            let r = bmo_lambda_norm(&g, &d, lambda).unwrap();
            prop_assert!(bmo <= 2.0 * r.value + 1e-12);
        }
    }

    #[test]
    fn abc_examples() {
        let w = unit_window();
        let c = GridFunction::on_window(w, 5, vec![2.0; 1 << 10]).unwrap();
        assert_eq!(bmo_rn_abc(&c, 0.5).unwrap().abc, Some((0.0, 0.0, 2.0)));
        // unit jump across the horizontal midline
        let n = 1usize << 5;
        let jump = GridFunction::on_window(w, 5, (0..n * n).map(|c| if c / n < n / 2 { 0.0 } else { 1.0 }).collect()).unwrap();
        let r = bmo_rn_abc(&jump, 0.5).unwrap();
        let (a, b, _) = r.abc.unwrap();
        assert_eq!(b, 1.0);
        assert_eq!(a, 0.5);
        for seed in 0..5 {
            let f = random_dyadic(5, seed);
            let r = bmo_rn_abc(&f, 0.3).unwrap();
            let (a, b, c) = r.abc.unwrap();
            assert!(r.value <= 10.0 * (a + b + c));
        }
    }

    #[test]
    fn qh_function_properties() {
        let d = disk();
        let w = unit_window();
        let level = 7;
        let a = w.center(&w.cell_at(Point::new(0.2, 0.0), level).unwrap());
        let f = gen_qh_function(&d, a, w, level).unwrap();
        assert_eq!(f.at(a), Some(0.0));
        let dec = build_whitney(&d, w, level).unwrap();
        for c in dec.interior_cubes() {
            let ((x0, x1), (y0, y1)) = c.cube.extent_at(level);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in x0..x1 {
                for j in y0..y1 {
                    let v = f.value(i as usize, j as usize);
                    if v.is_finite() {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            assert!(hi - lo <= 2f64.sqrt() * 1.1);
        }
        let bmo = bmo_homogeneous_norm(&f, &d).value;
        assert!(bmo.is_finite() && bmo < 2.0);
    }

    #[test]
    fn dipole_properties() {
        let d = disk();
        let w = unit_window();
        let level = 6;
        let z1 = w.center(&w.cell_at(Point::new(0.5, 0.0), level).unwrap());
        let z2 = w.center(&w.cell_at(Point::new(-0.5, 0.0), level).unwrap());
        let zero = gen_dipole(&d, z1, z2, 0.0, 0.0, w, level).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0 || v.is_nan()));
        let k1 = gen_qh_function(&d, z1, w, level).unwrap();
        let k12 = k1.at(z2).unwrap();
        let f = gen_dipole(&d, z1, z2, 0.5 * k12, 0.5 * k12, w, level).unwrap();
        assert_eq!(f.at(z1), Some(0.5 * k12));
        let f1 = gen_dipole(&d, z1, z2, 1.0, 0.0, w, level).unwrap();
        for (c, v) in f1.values().iter().enumerate() {
            if *v > 0.0 {
                assert!(k1.values()[c] < 1.0);
            }
        }
    }

    #[test]
    fn whitney_checks() {
        let d = disk();
        let w = unit_window();
        let level = 7;
        let dec = build_whitney(&d, w, level).unwrap();
        let zero = GridFunction::sample(&d, w, level, |_| 0.0).unwrap();
        assert_eq!(check_log_growth(&zero, &dec, 0.25).unwrap(), 0.0);
        assert_eq!(check_adjacent_averages(&zero, &dec).unwrap(), 0.0);
        let c = GridFunction::sample(&d, w, level, |_| -2.0).unwrap();
        let g = check_log_growth(&c, &dec, 0.25).unwrap();
        assert_eq!(g, 2.0);
        assert!(g <= bmo_lambda_norm(&c, &d, 0.25).unwrap().value);

        // near-boundary dipole: raw averages grow, the normalised ratio stays put
        let z = w.center(&w.cell_at(Point::new(0.97, 0.0), level).unwrap());
        let f = gen_dipole(&d, z, Point::new(0.0, 0.0), 5.0, 0.0, w, level).unwrap();
        let raw = dec.interior_cubes().filter_map(|c| f.cube_average(&c.cube).ok()).fold(0.0f64, |m, v| m.max(v.abs()));
        let ratio = check_log_growth(&f, &dec, 0.25).unwrap();
        assert!(raw > ratio);
        assert!(ratio <= 3.0 * bmo_lambda_norm(&f, &d, 0.25).unwrap().value);
    }

    #[test]
    fn adjacent_gaps_of_linear_function_scale_with_size() {
        let hp = make_domain(&"half_plane".parse().unwrap()).unwrap();
        let w = Window::new(Point::new(-4.0, 0.0), 4.0).unwrap();
        let level = 8;
        let dec = build_whitney(&hp, w, level).unwrap();
        let f = GridFunction::sample(&hp, w, level, |p| p.y).unwrap();
        let gap = check_adjacent_averages(&f, &dec).unwrap();
        let mut want = 0.0f64;
        for (k, c) in dec.cubes().iter().enumerate() {
            for &m in dec.neighbor_indices(k) {
                let o = &dec.cubes()[m];
                if c.tag == Tag::Interior && o.tag == Tag::Interior {
                    want = want.max((w.center(&c.cube).y - w.center(&o.cube).y).abs());
                }
            }
        }
        assert!((gap - want).abs() < 1e-9);
        let biggest = dec.interior_cubes().map(|c| c.side).fold(0.0, f64::max);
        assert!(gap <= 2.5 * biggest);
    }

    #[test]
    fn suite_is_twenty_functions() {
        let d = disk();
        let w = unit_window();
        let level = 6;
        let dec = build_whitney(&d, w, level).unwrap();
        let suite = test_suite(&d, &dec, level, 1).unwrap();
        assert_eq!(suite.len(), 20);
        for (name, f) in &suite {
            assert!(bmo_homogeneous_norm(f, &d).value.is_finite(), "{name}");
        }
        let again = test_suite(&d, &dec, level, 1).unwrap();
        assert!(suite.iter().zip(&again).all(|(a, b)| a == b));
    }
}
