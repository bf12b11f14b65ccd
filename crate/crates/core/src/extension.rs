//! The extension operator `T_λ` and experiments measuring its norm.
//!
//! `T_λ f = f` on Ω, `f_{Q*}` on complement Whitney cubes `Q` with `ℓ(Q) <= λ`
//! (`Q*` the deterministic matching cube), and 0 on larger complement cubes.
//! Frontier cells take the value of the nearest complement cell by grid hops.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bmo::{bmo_lambda_norm, bmo_lambda_window, gen_dipole, gen_qh_function, gen_whitney_wave, CellKind, GridFunction, NormReport};
use crate::domain::Domain;
use crate::dyadic::{DyadicCube, Window};
use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::whitney::{build_whitney, Tag, WhitneyDecomposition};

/// `ε²δ / (320 n (1 + √n ε))`, the largest admissible `λ`.
pub fn lambda_max(epsilon: f64, delta: f64, n: u32) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0 && delta > 0.0 && delta.is_finite() && n >= 1) {
        return Err(Error::Precondition(format!("need 0 < ε <= 1, δ > 0, n >= 1; got ε = {epsilon}, δ = {delta}, n = {n}")));
    }
    let n = n as f64;
    Ok(epsilon * epsilon * delta / (320.0 * n * (1.0 + n.sqrt() * epsilon)))
}

/// What to do with a small complement cube that has no matching cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchPolicy {
    /// Fail, listing every unmatched cube.
    Strict,
    /// Use the nearest interior cube of any size instead.
    BestEffort,
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    /// `T_λ f` on every cell of the window.
    pub extended: GridFunction,
    /// `(Q, Q*)` for each complement cube with `ℓ(Q) <= λ`.
    pub assignment: Vec<(DyadicCube, DyadicCube)>,
    /// Complement cubes with `ℓ(Q) > λ`, set to 0.
    pub zero_region: Vec<DyadicCube>,
    /// Cubes whose `Q*` came from the best-effort fallback.
    pub fallback: Vec<DyadicCube>,
    /// Non-inside cells outside every complement cube, filled from the nearest one.
    pub frontier_cells: usize,
    /// `λ` exceeds `lambda_max(ε, δ, 2)`.
    pub above_lambda_max: bool,
    pub input: NormReport,
    pub output: NormReport,
}

impl ExtensionResult {
    pub fn input_norm(&self) -> f64 {
        self.input.value
    }

    pub fn output_norm(&self) -> f64 {
        self.output.value
    }

    /// `None` when the input norm vanishes.
    pub fn ratio(&self) -> Option<f64> {
        (self.input.value > 0.0).then(|| self.output.value / self.input.value)
    }
}

/// Nearest interior cube by box distance, larger cubes first on ties.
fn nearest_interior(dec: &WhitneyDecomposition, q: &DyadicCube) -> Option<DyadicCube> {
    let w = dec.window();
    let rect = w.cube_rect(q);
    dec.interior_cubes()
        .map(|c| (w.cube_rect(&c.cube).dist_to_rect(&rect), c.cube))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, c)| c)
}

/// Applies `T_λ` to `f` using the decomposition `dec` of the same window.
pub fn extend(
    f: &GridFunction,
    domain: &Domain,
    dec: &WhitneyDecomposition,
    lambda: f64,
    epsilon: f64,
    delta: f64,
    policy: MatchPolicy,
) -> Result<ExtensionResult> {
    if f.window() != dec.window() || dec.max_depth() > f.level() {
        return Err(Error::Precondition("decomposition and grid function use different grids".into()));
    }
    let above_lambda_max = lambda > lambda_max(epsilon, delta, 2)?;
    let window = dec.window();
    let small: Vec<DyadicCube> = dec.exterior_cubes().filter(|c| c.side <= lambda * (1.0 + 1e-12)).map(|c| c.cube).collect();
    let zero_region: Vec<DyadicCube> = dec.exterior_cubes().filter(|c| c.side > lambda * (1.0 + 1e-12)).map(|c| c.cube).collect();
    let matched: Vec<(DyadicCube, Option<DyadicCube>, bool)> = small
        .par_iter()
        .map(|q| match dec.search_matching_cube(q, epsilon) {
            Ok(m) => (*q, Some(m), false),
            Err(_) => match policy {
                MatchPolicy::Strict => (*q, None, false),
                MatchPolicy::BestEffort => (*q, nearest_interior(dec, q), true),
            },
        })
        .collect();
    let unmatched: Vec<DyadicCube> = matched.iter().filter(|m| m.1.is_none()).map(|m| m.0).collect();
    if !unmatched.is_empty() {
        return Err(Error::MatchingFailed(unmatched));
    }
    let assignment: Vec<(DyadicCube, DyadicCube)> = matched.iter().map(|m| (m.0, m.1.expect("checked"))).collect();
    let fallback = matched.iter().filter(|m| m.2).map(|m| m.0).collect();

    let level = f.level();
    let n = f.n();
    let mut values = vec![f64::NAN; n * n];
    let mut assigned = vec![false; n * n];
    let paint = |q: &DyadicCube, v: f64, values: &mut Vec<f64>, assigned: &mut Vec<bool>| {
        let ((x0, x1), (y0, y1)) = q.extent_at(level);
        for j in y0 as usize..y1 as usize {
            for i in x0 as usize..x1 as usize {
                values[j * n + i] = v;
                assigned[j * n + i] = true;
            }
        }
    };
    for &(q, star) in &assignment {
        paint(&q, f.cube_average(&star)?, &mut values, &mut assigned);
    }
    for q in &zero_region {
        paint(q, 0.0, &mut values, &mut assigned);
    }
    let mut seeds: Vec<usize> = (0..n * n).filter(|&c| assigned[c]).collect();
    for (c, kind) in f.mask().iter().enumerate() {
        if *kind == CellKind::Inside {
            values[c] = f.values()[c];
            assigned[c] = true;
        }
    }
    if seeds.is_empty() {
        seeds = (0..n * n).filter(|&c| assigned[c]).collect();
    }
    let frontier_cells = assigned.iter().filter(|a| !**a).count();
    let mut queue: VecDeque<usize> = seeds.into();
    while let Some(c) = queue.pop_front() {
        let (i, j) = (c % n, c / n);
        let around = [(i > 0).then(|| c - 1), (i + 1 < n).then(|| c + 1), (j > 0).then(|| c - n), (j + 1 < n).then(|| c + n)];
        for m in around.into_iter().flatten() {
            if !assigned[m] {
                assigned[m] = true;
                values[m] = values[c];
                queue.push_back(m);
            }
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("function has no defined values to extend".into()));
    }
    let extended = GridFunction::on_window(window, level, values)?;
    let input = bmo_lambda_norm(f, domain, lambda)?;
    let output = bmo_lambda_window(&extended, lambda)?;
    Ok(ExtensionResult { extended, assignment, zero_region, fallback, frontier_cells, above_lambda_max, input, output })
}

/// `max_{Q ∈ E ∪ E′} |(T_λ f)_Q| / (1 + log₊(λ/ℓ(Q)))`.
pub fn average_growth(result: &ExtensionResult, dec: &WhitneyDecomposition, lambda: f64) -> f64 {
    dec.cubes()
        .iter()
        .filter_map(|c| {
            let m = result.extended.cube_average(&c.cube).ok()?;
            Some(m.abs() / (1.0 + (lambda / c.side).ln().max(0.0)))
        })
        .fold(0.0, f64::max)
}

/// Inside cell centre of `window` whose distance to ∂Ω is closest to `target`.
fn point_at_depth(domain: &Domain, window: &Window, level: u8, target: f64) -> Option<Point> {
    let n = 1u64 << level;
    let mut best: Option<(f64, Point)> = None;
    for j in 0..n {
        for i in 0..n {
            let p = window.center(&DyadicCube { level, i, j });
            let d = domain.signed_distance(p);
            if d > 0.0 && best.is_none_or(|(b, _)| (d - target).abs() < b) {
                best = Some(((d - target).abs(), p));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// A 20-function suite scaled to an arbitrary window: constants, affine and
/// quadratic functions in window units, `k_Ω(a,·)` at five depths, three
/// dipoles, a jump, `log d_Ω` and five Whitney waves.
pub fn window_suite(domain: &Domain, dec: &WhitneyDecomposition, level: u8, seed: u64) -> Result<Vec<(String, GridFunction)>> {
    let w = dec.window();
    let side = w.side;
    let c = w.rect().center();
    let probe = level.min(6);
    let depths = [0.4, 0.2, 0.1, 0.05, 0.01];
    let anchors: Vec<Point> = depths
        .iter()
        .map(|d| point_at_depth(domain, &w, probe, d * side).ok_or(Error::InteriorSetEmpty { lambda: d * side }))
        .collect::<Result<_>>()?;
    let mut suite: Vec<(String, GridFunction)> = Vec::new();
    suite.push(("const(1)".into(), GridFunction::sample(domain, w, level, |_| 1.0)?));
    suite.push(("const(-3)".into(), GridFunction::sample(domain, w, level, |_| -3.0)?));
    suite.push(("x".into(), GridFunction::sample(domain, w, level, |p| (p.x - c.x) / side)?));
    suite.push(("x+2y".into(), GridFunction::sample(domain, w, level, |p| (p.x - c.x + 2.0 * (p.y - c.y)) / side)?));
    suite.push((
        "x^2-y^2".into(),
        GridFunction::sample(domain, w, level, |p| ((p.x - c.x).powi(2) - (p.y - c.y).powi(2)) / (side * side))?,
    ));
    for (d, a) in depths.iter().zip(&anchors) {
        suite.push((format!("k(a,.) d(a)={d}W"), gen_qh_function(domain, *a, w, level)?));
    }
    for (z1, z2, r1, r2) in [(0, 3, 5.0, 0.0), (1, 2, 2.0, 2.0), (2, 4, 3.0, 3.0)] {
        suite.push((
            format!("dipole(a{z1},a{z2},{r1},{r2})"),
            gen_dipole(domain, anchors[z1], anchors[z2], r1, r2, w, level)?,
        ));
    }
    suite.push((
        "sign(y-x)".into(),
        GridFunction::sample(domain, w, level, |p| {
            let t = (p.y - c.y) - (p.x - c.x);
            if t == 0.0 {
                0.0
            } else {
                t.signum()
            }
        })?,
    ));
    suite.push(("log d".into(), GridFunction::sample(domain, w, level, |p| (domain.distance_to_boundary(p) / side).ln())?));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..5 {
        let omega = rng.gen_range(0.2..1.5);
        let amplitude = rng.gen_range(0.5..1.0) / omega;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let f = gen_whitney_wave(domain, dec, level, anchors[0], amplitude, omega, phase)?;
        suite.push((format!("wave{k}(A={amplitude:.3},w={omega:.3})"), f));
    }
    Ok(suite)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorRow {
    pub lambda: f64,
    pub function: String,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: Option<f64>,
    pub fallback_cubes: usize,
    pub frontier_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorNormTable {
    pub lambdas: Vec<f64>,
    pub rows: Vec<OperatorRow>,
}

impl OperatorNormTable {
    /// Largest ratio for each `λ`, `None` if every function had zero norm.
    pub fn max_ratios(&self) -> Vec<(f64, Option<f64>)> {
        self.lambdas
            .iter()
            .map(|&l| {
                let m = self.rows.iter().filter(|r| r.lambda == l).filter_map(|r| r.ratio).fold(None, |a: Option<f64>, r| {
                    Some(a.map_or(r, |a| a.max(r)))
                });
                (l, m)
            })
            .collect()
    }

    /// `max/min` of the per-`λ` maxima.
    pub fn spread(&self) -> Option<f64> {
        let m: Vec<f64> = self.max_ratios().into_iter().filter_map(|(_, r)| r).collect();
        if m.is_empty() {
            return None;
        }
        Some(m.iter().copied().fold(0.0, f64::max) / m.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// `‖T_λ f‖_{bmo_λ(window)} / ‖f‖_{bmo_λ(Ω)}` for each `λ` and suite function.
pub fn operator_norm_experiment(
    domain: &Domain,
    dec: &WhitneyDecomposition,
    suite: &[(String, GridFunction)],
    lambdas: &[f64],
    epsilon: f64,
    delta: f64,
) -> Result<OperatorNormTable> {
    if suite.is_empty() || lambdas.is_empty() {
        return Err(Error::Precondition("suite and lambda list must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &lambda in lambdas {
        for (name, f) in suite {
            let r = extend(f, domain, dec, lambda, epsilon, delta, MatchPolicy::Strict)?;
            rows.push(OperatorRow {
                lambda,
                function: name.clone(),
                input_norm: r.input_norm(),
                output_norm: r.output_norm(),
                ratio: r.ratio(),
                fallback_cubes: r.fallback.len(),
                frontier_cells: r.frontier_cells,
            });
        }
    }
    Ok(OperatorNormTable { lambdas: lambdas.to_vec(), rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleRow {
    pub window_size: f64,
    pub lambda: f64,
    pub resolution: f64,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: Option<f64>,
    pub fallback_cubes: usize,
}

/// `f = max(x, 0)` on `domain` (meant for `intro_lipschitz`) over the windows
/// `[−R/2, R/2]²`, extended best-effort with `ε = 1/2`.
pub fn counterexample_experiment(domain: &Domain, window_sizes: &[f64], lambda: f64, h: f64) -> Result<Vec<CounterexampleRow>> {
    counterexample_with(domain, window_sizes, lambda, h, |p| p.x.max(0.0))
}

pub fn counterexample_with(
    domain: &Domain,
    window_sizes: &[f64],
    lambda: f64,
    h: f64,
    f: impl Fn(Point) -> f64 + Sync + Copy,
) -> Result<Vec<CounterexampleRow>> {
    let epsilon = 0.5;
    let mut rows = Vec::new();
    for &r in window_sizes {
        let window = Window::centered(Point::new(0.0, 0.0), r)?;
        let level = window
            .level_for_cell_size(h)
            .ok_or_else(|| Error::Precondition(format!("resolution {h} does not subdivide window side {r}")))?;
        let local = domain.clone().with_bounding_box(Rect::square(Point::new(0.0, 0.0), r / 2.0));
        let dec = build_whitney(&local, window, level)?;
        let g = GridFunction::sample(&local, window, level, f)?;
        let ext = extend(&g, &local, &dec, lambda, epsilon, 1.0, MatchPolicy::BestEffort)?;
        rows.push(CounterexampleRow {
            window_size: r,
            lambda,
            resolution: h,
            input_norm: ext.input_norm(),
            output_norm: ext.output_norm(),
            ratio: ext.ratio(),
            fallback_cubes: ext.fallback.len(),
        });
    }
    Ok(rows)
}

/// Values of `T_λ f` on each complement cube, for checking per-cube constancy.
pub fn exterior_values(result: &ExtensionResult, dec: &WhitneyDecomposition) -> Vec<(DyadicCube, f64, f64)> {
    let f = &result.extended;
    let n = f.n();
    dec.cubes()
        .iter()
        .filter(|c| c.tag == Tag::Exterior)
        .map(|c| {
            let ((x0, x1), (y0, y1)) = c.cube.extent_at(f.level());
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in y0 as usize..y1 as usize {
                for i in x0 as usize..x1 as usize {
                    let v = f.values()[j * n + i];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            (c.cube, lo, hi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;

    fn dom(s: &str) -> Domain {
        make_domain(&s.parse().unwrap()).unwrap()
    }

    #[test]
    fn lambda_max_examples() {
        let a = lambda_max(0.5, 1.0, 2).unwrap();
        assert!((a - 0.25 / (640.0 * (1.0 + std::f64::consts::SQRT_2 / 2.0))).abs() < 1e-18);
        assert!((a - 2.288e-4).abs() < 1e-7);
        let b = lambda_max(1.0, 1.0, 2).unwrap();
        assert!((b - 6.47e-4).abs() < 1e-6);
        assert!(lambda_max(0.0, 1.0, 2).is_err());
        assert!(lambda_max(0.5, -1.0, 2).is_err());
        assert!(lambda_max(1.5, 1.0, 2).is_err());
        assert!(lambda_max(0.5, 1.0, 0).is_err());
        let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        for w in grid.windows(2) {
            assert!(lambda_max(w[1], 0.5, 2).unwrap() > lambda_max(w[0], 0.5, 2).unwrap());
            assert!(lambda_max(0.5, w[1], 2).unwrap() > lambda_max(0.5, w[0], 2).unwrap());
        }
    }

    /// Window of side 1/64 straddling the unit circle at (1, 0).
    fn zoomed() -> (Domain, WhitneyDecomposition, u8) {
        let d = dom("disk:1");
        let w = Window::centered(Point::new(1.0, 0.0), 1.0 / 64.0).unwrap();
        let dec = build_whitney(&d, w, 7).unwrap();
        (d, dec, 7)
    }

    #[test]
    fn restriction_and_constancy() {
        let (d, dec, level) = zoomed();
        let lambda = dec.window().side / 16.0;
        let f = GridFunction::sample(&d, dec.window(), level, |p| (40.0 * p.y).sin() + p.x).unwrap();
        let r = extend(&f, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap();
        for (c, kind) in f.mask().iter().enumerate() {
            if *kind == CellKind::Inside {
                assert_eq!(r.extended.values()[c], f.values()[c]);
            }
        }
        for (q, lo, hi) in exterior_values(&r, &dec) {
            assert_eq!(lo, hi, "{q}");
            if r.zero_region.contains(&q) {
                assert_eq!(lo, 0.0);
            }
        }
        for (q, star) in &r.assignment {
            let (a, b) = (r.extended.cube_average(q).unwrap(), f.cube_average(star).unwrap());
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            let ratio = dec.window().side_at(star.level) / dec.window().side_at(q.level);
            assert!((1.0..=4.0).contains(&ratio));
        }
        assert!(!r.assignment.is_empty() && !r.zero_region.is_empty());
        assert!(r.above_lambda_max);
    }

    #[test]
    fn constants_and_zero() {
        let (d, dec, level) = zoomed();
        let lambda = dec.window().side / 16.0;
        let c = GridFunction::sample(&d, dec.window(), level, |_| 2.5).unwrap();
        let r = extend(&c, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap();
        for (q, _) in &r.assignment {
            assert_eq!(r.extended.cube_average(q).unwrap(), 2.5);
        }
        // direct sweep: ⨍|Tc| <= |c| on every cube and the oscillation of a
        // 0/c step is at most |c|/2, so the norm is at most 1.5|c|
        assert!(r.output_norm() <= 1.5 * 2.5 + 1e-12);
        assert!(r.input_norm() > 0.0);
        let zero = GridFunction::sample(&d, dec.window(), level, |_| 0.0).unwrap();
        let z = extend(&zero, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap();
        assert!(z.extended.values().iter().all(|&v| v == 0.0));
        assert_eq!(z.ratio(), None);
    }

    #[test]
    fn linearity() {
        let (d, dec, level) = zoomed();
        let lambda = dec.window().side / 8.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (u, v) = (rng.gen_range(1.0..50.0), rng.gen_range(1.0..50.0));
            let f = GridFunction::sample(&d, dec.window(), level, |p| (u * p.x).sin()).unwrap();
            let g = GridFunction::sample(&d, dec.window(), level, |p| (v * p.y).cos()).unwrap();
            let combined = f.combine(a, &g, b).unwrap();
            let tf = extend(&f, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap().extended;
            let tg = extend(&g, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap().extended;
            let th = extend(&combined, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap().extended;
            for c in 0..th.values().len() {
                let lin = a * tf.values()[c] + b * tg.values()[c];
                // cube averages come from summed-area differences, exact only up to rounding
                assert!((th.values()[c] - lin).abs() <= 1e-10 * (1.0 + lin.abs()), "{} vs {lin}", th.values()[c]);
            }
        }
    }

    #[test]
    fn strict_matching_reports_unmatched_cubes() {
        let d = dom("intro_lipschitz").with_bounding_box(Rect::square(Point::new(0.0, 0.0), 4.0));
        let w = Window::centered(Point::new(0.0, 0.0), 8.0).unwrap();
        let dec = build_whitney(&d, w, 7).unwrap();
        let f = GridFunction::sample(&d, w, 7, |p| p.x.max(0.0)).unwrap();
        let err = extend(&f, &d, &dec, 2.0, 0.5, 1.0, MatchPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::MatchingFailed(ref v) if !v.is_empty()));
        let r = extend(&f, &d, &dec, 2.0, 0.5, 1.0, MatchPolicy::BestEffort).unwrap();
        assert!(!r.fallback.is_empty());
    }

    #[test]
    fn extension_averages_grow_at_most_logarithmically() {
        let (d, dec, level) = zoomed();
        let lambda = dec.window().side / 16.0;
        let suite = window_suite(&d, &dec, level, 1).unwrap();
        assert_eq!(suite.len(), 20);
        for (name, f) in &suite {
            let r = extend(f, &d, &dec, lambda, 0.5, 0.5, MatchPolicy::Strict).unwrap();
            let growth = average_growth(&r, &dec, lambda);
            assert!(growth <= 2.0 * r.input_norm() + 1e-12, "{name}: {growth} vs {}", r.input_norm());
        }
    }

    #[test]
    fn operator_table_shapes() {
        let (d, dec, level) = zoomed();
        let s = dec.window().side;
        let mut suite = window_suite(&d, &dec, level, 2).unwrap();
        suite.truncate(3);
        suite.push(("zero".into(), GridFunction::sample(&d, dec.window(), level, |_| 0.0).unwrap()));
        let t = operator_norm_experiment(&d, &dec, &suite, &[s / 16.0, s / 32.0], 0.5, 0.5).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert!(t.rows.iter().filter(|r| r.function == "zero").all(|r| r.ratio.is_none()));
        assert!(t.max_ratios().iter().all(|(_, r)| r.is_some_and(|r| r.is_finite() && r > 0.0)));
        assert!(operator_norm_experiment(&d, &dec, &[], &[1.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn zero_counterexample_gives_na() {
        let d = dom("intro_lipschitz");
        let rows = counterexample_with(&d, &[4.0], 2.0, 1.0 / 8.0, |_| 0.0).unwrap();
        assert_eq!(rows[0].ratio, None);
        assert!(counterexample_experiment(&d, &[4.0], 2.0, 0.3).is_err());
    }
}
