//! `(ε,δ)` cigars, length cigars and quasi-hyperbolic uniformity envelopes.
//!
//! Everything here is numerical evidence: per-pair `ε` is the best value over
//! a small menu of candidate curves (the straight segment and the refined
//! quasi-hyperbolic geodesic), so it estimates the pair's true `ε` from below
//! only up to the quality of that menu. Divergence along adversarial pair
//! sequences near boundary features is the robust signal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{Domain, FeatureKind};
use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::qhyper::{j_distance, qh_distance_in, segment_qh, Geodesic, Polyline, DEFAULT_TOL};

/// Arclength fraction excluded at each end when sampling the John quotient.
const END_EXCLUSION: f64 = 1e-3;
const SAMPLES: usize = 1000;
/// Adversarial pairs per feature, at tip distances `δ 2^{-k}`, `k = 1..=8`.
const SWEEP_STEPS: i32 = 8;
/// Lattice cells per side of a per-pair window are kept within `[64, 256]`.
const MIN_CELLS: f64 = 64.0;
const MAX_CELLS: f64 = 256.0;
/// Sample points per geodesic for the uniformity envelope.
const ENVELOPE_SAMPLES: usize = 8;

fn check_pair(x: Point, y: Point, gamma: &Polyline) -> Result<f64> {
    let sep = x.dist(y);
    if !(sep > 0.0) {
        return Err(Error::Precondition("the pair must be distinct".into()));
    }
    let tol = 1e-9 * (1.0 + sep);
    if gamma.start().dist(x) > tol || gamma.end().dist(y) > tol {
        return Err(Error::InvalidCurve("curve does not join the pair".into()));
    }
    Ok(sep)
}

/// Points at the given arclength positions along a polyline.
fn at_arclength(points: &[Point], positions: impl Iterator<Item = f64>) -> Vec<(f64, Point)> {
    let mut out = Vec::new();
    let mut seg = 0;
    let mut start = 0.0;
    for t in positions {
        while seg + 1 < points.len() - 1 && start + points[seg].dist(points[seg + 1]) < t {
            start += points[seg].dist(points[seg + 1]);
            seg += 1;
        }
        let len = points[seg].dist(points[seg + 1]);
        let f = if len > 0.0 { ((t - start) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push((t, points[seg].lerp(points[seg + 1], f)));
    }
    out
}

/// Interior sample points `(arclength, z)` with the end fractions excluded.
fn john_samples(gamma: &Polyline) -> Vec<(f64, Point)> {
    let s = gamma.euclidean_length();
    let (lo, hi) = (END_EXCLUSION * s, (1.0 - END_EXCLUSION) * s);
    at_arclength(gamma.points(), (0..=SAMPLES).map(|k| lo + (hi - lo) * k as f64 / SAMPLES as f64))
}

/// Largest `ε` for which `γ` satisfies both cigar conditions, clamped to 1:
/// `min(|x−y|/s(γ), min_z d(z)|x−y| / (|z−x||z−y|))`.
pub fn curve_epsilon(domain: &Domain, x: Point, y: Point, gamma: &Polyline) -> Result<f64> {
    let sep = check_pair(x, y, gamma)?;
    let mut eps = sep / gamma.euclidean_length();
    for (_, z) in john_samples(gamma) {
        let d = domain.signed_distance(z);
        if d <= 0.0 {
            return Err(Error::InvalidCurve(format!("curve leaves the domain at {z}")));
        }
        eps = eps.min(d * sep / (z.dist(x) * z.dist(y)));
    }
    Ok(eps.min(1.0))
}

/// Length-cigar constants of a curve: `a = s(γ)/|x−y|` and
/// `b = max_z min(s(γ(x,z)), s(γ(z,y))) / d(z)`.
pub fn curve_length_cigar(domain: &Domain, x: Point, y: Point, gamma: &Polyline) -> Result<(f64, f64)> {
    let sep = check_pair(x, y, gamma)?;
    let s = gamma.euclidean_length();
    let mut b = 0.0f64;
    for (t, z) in john_samples(gamma) {
        let d = domain.signed_distance(z);
        if d <= 0.0 {
            return Err(Error::InvalidCurve(format!("curve leaves the domain at {z}")));
        }
        b = b.max(t.min(s - t) / d);
    }
    Ok((s / sep, b))
}

/// `min(1/a, 1/(ab))`, clamped to 1.
pub fn epsilon_from_ab(a: f64, b: f64) -> Result<f64> {
    if !(a >= 1.0 && b > 0.0) {
        return Err(Error::Precondition(format!("need a >= 1 and b > 0, got a = {a}, b = {b}")));
    }
    Ok((1.0 / a).min(1.0 / (a * b)).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    ConsistentWith,
    EvidenceAgainst,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ConsistentWith => "consistent-with-(ε,δ)",
            Verdict::EvidenceAgainst => "evidence-against",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairKind {
    Random,
    /// Pair placed at distance `t` from boundary feature number `feature`.
    Adversarial { feature: usize, t: f64 },
}

/// One evaluated pair with its best candidate curve.
#[derive(Clone, Debug)]
pub struct PairRecord {
    pub x: Point,
    pub y: Point,
    pub kind: PairKind,
    pub separation: f64,
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub j: f64,
    pub k: f64,
    pub k_error: f64,
    /// Curve attaining `epsilon`.
    pub witness: Polyline,
    pub geodesic: Option<Polyline>,
}

/// Per-pair `ε` along an adversarial sequence approaching one feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSweep {
    pub feature: usize,
    pub point: Point,
    /// `(t, ε)` with `t` decreasing.
    pub steps: Vec<(f64, f64)>,
    pub diverging: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stability {
    pub name: &'static str,
    pub coarse: f64,
    pub fine: f64,
    pub stable: bool,
}

#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub epsilon_hat: f64,
    pub ab_hat: (f64, f64),
    pub cd_hat: (f64, f64),
    pub delta: f64,
    pub resolution: f64,
    pub pair_count: usize,
    /// Pairs for which no candidate curve was valid at this resolution.
    pub flagged: usize,
    pub worst_pairs: Vec<PairRecord>,
    pub pairs: Vec<PairRecord>,
    pub sweeps: Vec<FeatureSweep>,
    pub stability: Vec<Stability>,
    pub verdict: Verdict,
}

/// Envelope fit `k <= c j + d` over sub-pairs of sampled geodesics.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformityFit {
    pub c: f64,
    pub d: f64,
    /// Observed `(j, k)` points.
    pub points: Vec<(f64, f64)>,
    pub j_max: f64,
    /// Per feature: `(t, max(k − c j))` over the adversarial pair's sub-pairs.
    pub divergence: Vec<(usize, Vec<(f64, f64)>)>,
}

/// `n` pairs with `|x − y| < δ`, both points at distance `>= δ/64` from ∂Ω.
pub fn sample_pairs(domain: &Domain, delta: f64, n: usize, seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = domain.bounding_box();
    let clearance = delta / 64.0;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 1000 * n.max(1) {
        attempts += 1;
        let x = Point::new(rng.gen_range(bbox.min.x..bbox.max.x), rng.gen_range(bbox.min.y..bbox.max.y));
        if domain.signed_distance(x) < clearance {
            continue;
        }
        let r = delta * rng.gen_range(0.01..1.0f64);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let y = x + Point::new(theta.cos(), theta.sin()) * r;
        if bbox.contains(y) && domain.signed_distance(y) >= clearance {
            out.push((x, y));
        }
    }
    out
}

/// Pairs approaching each boundary feature: `(feature, t, x, y)`.
pub fn adversarial_pairs(domain: &Domain, delta: f64) -> Vec<(usize, f64, Point, Point)> {
    let mut out = Vec::new();
    for (f, feat) in domain.features().iter().enumerate() {
        for k in 1..=SWEEP_STEPS {
            let t = delta * 0.5f64.powi(k);
            let base = feat.point + feat.axis * t;
            let (x, y) = match feat.kind {
                FeatureKind::Wedge { half_angle } => {
                    let sigma = t * (half_angle.tan() + t / delta);
                    (base + feat.axis.perp() * sigma, base - feat.axis.perp() * sigma)
                }
                FeatureKind::Spike => (base, feat.point + feat.axis * (2.0 * t)),
            };
            if domain.signed_distance(x) > 0.0 && domain.signed_distance(y) > 0.0 {
                out.push((f, t, x, y));
            }
        }
    }
    out
}

/// Geodesic on a lattice local to `rect`, growing the window while disconnected.
fn local_geodesic(domain: &Domain, x: Point, y: Point, mut rect: Rect, h: f64) -> Result<Geodesic> {
    let bbox = domain.bounding_box();
    loop {
        let side = rect.width().max(rect.height());
        let hl = h.min(side / MIN_CELLS).max(side / MAX_CELLS);
        match qh_distance_in(domain, x, y, hl, rect) {
            Err(Error::Disconnected { .. }) if !rect.contains_rect(&bbox) => {
                rect = rect.expanded(0.5 * side).intersection(&bbox).unwrap_or(bbox);
            }
            other => return other,
        }
    }
}

fn evaluate_pair(domain: &Domain, x: Point, y: Point, kind: PairKind, rect: Rect, h: f64) -> Option<PairRecord> {
    let geodesic = local_geodesic(domain, x, y, rect, h).ok();
    let mut candidates: Vec<Polyline> = Vec::new();
    if let Ok(seg) = Polyline::new(domain, vec![x, y], DEFAULT_TOL) {
        candidates.push(seg);
    }
    if let Some(g) = &geodesic {
        candidates.push(g.path.clone());
    }
    let (eps, witness) = candidates
        .into_iter()
        .filter_map(|c| curve_epsilon(domain, x, y, &c).ok().map(|e| (e, c)))
        .fold(None, |best: Option<(f64, Polyline)>, (e, c)| match best {
            Some((be, _)) if be >= e => best,
            _ => Some((e, c)),
        })?;
    let (a, b) = curve_length_cigar(domain, x, y, &witness).ok()?;
    let (k, k_error) = geodesic.as_ref().map_or((f64::NAN, f64::NAN), |g| (g.value, g.error));
    Some(PairRecord {
        x,
        y,
        kind,
        separation: x.dist(y),
        epsilon: eps,
        a,
        b,
        j: j_distance(domain, x, y),
        k,
        k_error,
        witness,
        geodesic: geodesic.map(|g| g.path),
    })
}

/// Random and adversarial pairs evaluated in parallel; `None` marks flagged pairs.
fn evaluate_all(domain: &Domain, delta: f64, n_pairs: usize, h: f64, seed: u64) -> Vec<Option<PairRecord>> {
    let mut jobs: Vec<(Point, Point, PairKind, Rect)> = sample_pairs(domain, delta, n_pairs, seed)
        .into_iter()
        .map(|(x, y)| (x, y, PairKind::Random, Rect::spanning(x, y).expanded(x.dist(y))))
        .collect();
    for (feature, t, x, y) in adversarial_pairs(domain, delta) {
        let p = domain.features()[feature].point;
        let r = Rect::spanning(x, y);
        let rect = Rect::new(Point::new(r.min.x.min(p.x), r.min.y.min(p.y)), Point::new(r.max.x.max(p.x), r.max.y.max(p.y)))
            .expanded(2.0 * t);
        jobs.push((x, y, PairKind::Adversarial { feature, t }, rect));
    }
    jobs.into_par_iter().map(|(x, y, kind, rect)| evaluate_pair(domain, x, y, kind, rect, h)).collect()
}

fn sweeps_of(domain: &Domain, records: &[PairRecord]) -> Vec<FeatureSweep> {
    let mut sweeps: Vec<FeatureSweep> = Vec::new();
    for (f, feat) in domain.features().iter().enumerate() {
        let mut steps: Vec<(f64, f64)> = records
            .iter()
            .filter_map(|r| match r.kind {
                PairKind::Adversarial { feature, t } if feature == f => Some((t, r.epsilon)),
                _ => None,
            })
            .collect();
        steps.sort_by(|a, b| b.0.total_cmp(&a.0));
        let diverging = steps.len() >= 3
            && steps.windows(2).all(|w| w[1].1 <= w[0].1)
            && steps.last().unwrap().1 <= steps[0].1 / 8.0;
        sweeps.push(FeatureSweep { feature: f, point: feat.point, steps, diverging });
    }
    sweeps
}

fn summarize(domain: &Domain, delta: f64, h: f64, evaluated: Vec<Option<PairRecord>>) -> ClassificationReport {
    let flagged = evaluated.iter().filter(|r| r.is_none()).count();
    let pairs: Vec<PairRecord> = evaluated.into_iter().flatten().collect();
    let epsilon_hat = pairs.iter().map(|r| r.epsilon).fold(1.0, f64::min);
    let ab_hat = pairs.iter().fold((1.0f64, 0.0f64), |(a, b), r| (a.max(r.a), b.max(r.b)));
    let sweeps = sweeps_of(domain, &pairs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].epsilon.total_cmp(&pairs[b].epsilon).then(a.cmp(&b)));
    let worst_pairs = order.iter().take(5).map(|&k| pairs[k].clone()).collect();
    let verdict = if sweeps.iter().any(|s| s.diverging) {
        Verdict::EvidenceAgainst
    } else if flagged > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::ConsistentWith
    };
    ClassificationReport {
        epsilon_hat,
        ab_hat,
        cd_hat: (f64::NAN, f64::NAN),
        delta,
        resolution: h,
        pair_count: pairs.len() + flagged,
        flagged,
        worst_pairs,
        pairs,
        sweeps,
        stability: Vec::new(),
        verdict,
    }
}

/// Estimates `ε` for pairs closer than `δ`, including adversarial sweeps toward
/// boundary features. A sweep whose `ε` never increases and ends below an
/// eighth of its start is reported as divergence.
pub fn estimate_ed(domain: &Domain, delta: f64, n_pairs: usize, h: f64, seed: u64) -> Result<ClassificationReport> {
    if n_pairs == 0 || !(delta > 0.0) {
        return Err(Error::Precondition("need n_pairs >= 1 and delta > 0".into()));
    }
    Ok(summarize(domain, delta, h, evaluate_all(domain, delta, n_pairs, h, seed)))
}

/// `(j, k)` for sub-pairs of evenly spaced vertices of a geodesic, with `k`
/// the quasi-hyperbolic length of the sub-arc.
fn envelope_points(domain: &Domain, path: &Polyline) -> Vec<(f64, f64)> {
    let pts = path.points();
    let mut cumulative = vec![0.0];
    for w in pts.windows(2) {
        let q = segment_qh(domain, w[0], w[1], DEFAULT_TOL).map(|q| q.value).unwrap_or(f64::NAN);
        cumulative.push(cumulative.last().unwrap() + q);
    }
    let m = ENVELOPE_SAMPLES.min(pts.len());
    let mut idx: Vec<usize> = (0..m).map(|i| (i * (pts.len() - 1) + (m - 1) / 2) / (m - 1).max(1)).collect();
    idx.dedup();
    let mut out = Vec::new();
    for (a, &ia) in idx.iter().enumerate() {
        for &ib in &idx[a + 1..] {
            let k = cumulative[ib] - cumulative[ia];
            if k.is_finite() && pts[ia] != pts[ib] {
                out.push((j_distance(domain, pts[ia], pts[ib]), k));
            }
        }
    }
    out
}

/// Minimal-area envelope over `c ∈ {2^k/8 : k = 0..10}`: `d(c) = max(0, max(k − c j))`,
/// choosing the `c` that minimises `c j_max²/2 + d j_max`.
pub fn fit_envelope(points: &[(f64, f64)]) -> (f64, f64) {
    let j_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let (c, d, _) = (0..=10)
        .map(|k| {
            let c = 2f64.powi(k) / 8.0;
            let d = points.iter().map(|&(j, kk)| kk - c * j).fold(0.0, f64::max);
            (c, d, c * j_max * j_max / 2.0 + d * j_max)
        })
        .fold((f64::NAN, f64::NAN, f64::INFINITY), |best, cand| if cand.2 < best.2 { cand } else { best });
    (c, d)
}

fn uniformity_from(domain: &Domain, pairs: &[PairRecord]) -> UniformityFit {
    let per_pair: Vec<(PairKind, Vec<(f64, f64)>)> = pairs
        .par_iter()
        .filter_map(|r| r.geodesic.as_ref().map(|g| (r.kind, envelope_points(domain, g))))
        .collect();
    let points: Vec<(f64, f64)> = per_pair.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (c, d) = fit_envelope(&points);
    let mut divergence: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (kind, pts) in &per_pair {
        if let PairKind::Adversarial { feature, t } = *kind {
            let excess = pts.iter().map(|&(j, k)| k - c * j).fold(0.0, f64::max);
            match divergence.iter_mut().find(|(f, _)| *f == feature) {
                Some((_, seq)) => seq.push((t, excess)),
                None => divergence.push((feature, vec![(t, excess)])),
            }
        }
    }
    let j_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    UniformityFit { c, d, points, j_max, divergence }
}

/// Fits `k_Ω(z,w) <= c j_Ω(z,w) + d` over points `z, w` sampled along the
/// geodesics of pairs closer than `δ`.
pub fn qh_uniformity_fit(domain: &Domain, delta: f64, n_pairs: usize, h: f64, seed: u64) -> Result<UniformityFit> {
    if n_pairs == 0 || !(delta > 0.0) {
        return Err(Error::Precondition("need n_pairs >= 1 and delta > 0".into()));
    }
    let pairs: Vec<PairRecord> = evaluate_all(domain, delta, n_pairs, h, seed).into_iter().flatten().collect();
    Ok(uniformity_from(domain, &pairs))
}

/// `|a − b| <= 20%` of the larger magnitude, with an absolute floor of `floor`.
pub fn stable(a: f64, b: f64, floor: f64) -> bool {
    (a - b).abs() <= 0.2 * a.abs().max(b.abs()).max(floor)
}

/// Runs the estimators at `h` and `h/2`. Divergence at either resolution gives
/// "evidence-against"; agreement of every estimator within 20% gives
/// "consistent-with-(ε,δ)"; anything else is "inconclusive".
pub fn classify(domain: &Domain, delta: f64, budget: usize, h: f64, seed: u64) -> Result<ClassificationReport> {
    if budget == 0 || !(delta > 0.0) {
        return Err(Error::Precondition("need budget >= 1 and delta > 0".into()));
    }
    let run = |h: f64| {
        let report = summarize(domain, delta, h, evaluate_all(domain, delta, budget, h, seed));
        let fit = uniformity_from(domain, &report.pairs);
        (report, fit)
    };
    let (coarse, coarse_fit) = run(h);
    let (mut fine, fine_fit) = run(h / 2.0);
    fine.cd_hat = (fine_fit.c, fine_fit.d);
    fine.stability = vec![
        Stability { name: "epsilon_hat", coarse: coarse.epsilon_hat, fine: fine.epsilon_hat, stable: false },
        Stability { name: "a_hat", coarse: coarse.ab_hat.0, fine: fine.ab_hat.0, stable: false },
        Stability { name: "b_hat", coarse: coarse.ab_hat.1, fine: fine.ab_hat.1, stable: false },
        Stability { name: "c_hat", coarse: coarse_fit.c, fine: fine_fit.c, stable: false },
        Stability { name: "d_hat", coarse: coarse_fit.d, fine: fine_fit.d, stable: false },
    ];
    for s in &mut fine.stability {
        // d may legitimately be near zero; compare it on the scale of one unit of k
        let floor = if s.name == "d_hat" { 1.0 } else { 1e-12 };
        s.stable = stable(s.coarse, s.fine, floor);
    }
    let diverging = coarse.sweeps.iter().chain(&fine.sweeps).any(|s| s.diverging);
    fine.verdict = if diverging {
        Verdict::EvidenceAgainst
    } else if coarse.flagged + fine.flagged == 0 && fine.stability.iter().all(|s| s.stable) {
        Verdict::ConsistentWith
    } else {
        Verdict::Inconclusive
    };
    Ok(fine)
}
