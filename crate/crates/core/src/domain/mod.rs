//! Planar domains described by signed-distance oracles.
//!
//! Every downstream computation consumes a [`Domain`] only through
//! [`Domain::signed_distance`]: positive inside the open set, negative in the
//! interior of its complement and zero on the boundary. All built-in shapes
//! return the exact signed distance, so the oracle is 1-Lipschitz and
//! `B(x, sd(x))` lies inside the domain whenever `sd(x) > 0`.

mod polygon;
mod specfile;

pub use polygon::{point_in_loop, PolygonShape};
pub use specfile::parse_spec_file;

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::geom::{dist_point_ray, dist_point_segment, Point, Rect};

/// Parameters of a built-in domain.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    /// `{y > 0}`.
    HalfPlane,
    /// Open disk of the given radius centred at the origin.
    Disk { radius: f64 },
    /// Open square of the given side centred at the origin.
    Square { side: f64 },
    /// Unit-thickness L with arms along the positive axes; arm lengths must exceed 1.
    LShape { horizontal: f64, vertical: f64 },
    /// Disk of radius `radius` minus the segment from `(radius - slit, 0)` to `(radius, 0)`.
    SlitDisk { radius: f64, slit: f64 },
    /// Outward cusp `{0 < x < 1, |y| < x^p}`, boundary sampled as a graded polygon.
    Cusp { exponent: f64 },
    /// `{(x, y) : 0 < y < max(1, 1 - x)}`.
    IntroLipschitz,
    Polygon { outer: Vec<Point>, holes: Vec<Vec<Point>> },
}

/// A boundary location where adversarial point pairs are placed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFeature {
    pub point: Point,
    /// Unit vector pointing into the thin part (complement wedge or domain spike).
    pub axis: Point,
    pub kind: FeatureKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureKind {
    /// The complement forms a wedge of the given half-angle poking into the domain.
    /// A slit tip is a wedge of half-angle 0.
    Wedge { half_angle: f64 },
    /// The domain narrows to a spike along `axis`.
    Spike,
}

#[derive(Clone, Debug)]
enum Shape {
    HalfPlane,
    Disk { radius: f64 },
    Square { half: f64 },
    SlitDisk { radius: f64, tip: Point },
    IntroLipschitz,
    Polygon(PolygonShape),
}

/// An open planar set with its signed-distance oracle.
#[derive(Clone, Debug)]
pub struct Domain {
    shape: Shape,
    bounding_box: Rect,
    label: String,
    is_exact: bool,
    features: Vec<BoundaryFeature>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")))
    }
}

/// Builds a domain from its specification with the shape's default bounding box.
pub fn make_domain(spec: &DomainSpec) -> Result<Domain> {
    let (shape, bbox, label) = match *spec {
        DomainSpec::HalfPlane => (
            Shape::HalfPlane,
            Rect::square(Point::new(0.0, 0.0), 8.0),
            "half_plane".to_string(),
        ),
        DomainSpec::Disk { radius } => {
            positive("radius", radius)?;
            (
                Shape::Disk { radius },
                Rect::square(Point::new(0.0, 0.0), 2.0 * radius),
                format!("disk({radius})"),
            )
        }
        DomainSpec::Square { side } => {
            positive("side", side)?;
            (
                Shape::Square { half: side / 2.0 },
                Rect::square(Point::new(0.0, 0.0), side),
                format!("square({side})"),
            )
        }
        DomainSpec::LShape { horizontal, vertical } => {
            if !(horizontal > 1.0 && vertical > 1.0 && horizontal.is_finite() && vertical.is_finite()) {
                return Err(Error::InvalidSpec("l_shape arm lengths must exceed the unit thickness".into()));
            }
            let outer = vec![
                Point::new(0.0, 0.0),
                Point::new(horizontal, 0.0),
                Point::new(horizontal, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, vertical),
                Point::new(0.0, vertical),
            ];
            let m = horizontal.max(vertical);
            (
                Shape::Polygon(PolygonShape::new(outer, vec![])?),
                Rect::new(Point::new(-0.5 * m, -0.5 * m), Point::new(1.5 * m, 1.5 * m)),
                format!("l_shape({horizontal},{vertical})"),
            )
        }
        DomainSpec::SlitDisk { radius, slit } => {
            positive("radius", radius)?;
            positive("slit", slit)?;
            if slit > radius {
                return Err(Error::InvalidSpec("slit longer than the radius".into()));
            }
            (
                Shape::SlitDisk { radius, tip: Point::new(radius - slit, 0.0) },
                Rect::square(Point::new(0.0, 0.0), 2.0 * radius),
                format!("slit_disk({radius},{slit})"),
            )
        }
        DomainSpec::Cusp { exponent } => {
            if !(exponent > 1.0 && exponent.is_finite()) {
                return Err(Error::InvalidSpec(format!("cusp exponent must exceed 1, got {exponent}")));
            }
            (
                Shape::Polygon(cusp_polygon(exponent)?),
                Rect::new(Point::new(-1.0, -1.5), Point::new(2.0, 1.5)),
                format!("cusp({exponent})"),
            )
        }
        DomainSpec::IntroLipschitz => (
            Shape::IntroLipschitz,
            Rect::square(Point::new(0.0, 0.0), 4.0),
            "intro_lipschitz".to_string(),
        ),
        DomainSpec::Polygon { ref outer, ref holes } => {
            let poly = PolygonShape::new(outer.clone(), holes.clone())?;
            let (mut lo, mut hi) = (outer[0], outer[0]);
            for p in outer {
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            let pad = 0.5 * (hi.x - lo.x).max(hi.y - lo.y);
            (
                Shape::Polygon(poly),
                Rect::new(lo, hi).expanded(pad),
                format!("polygon({} loops)", 1 + holes.len()),
            )
        }
    };
    let mut domain = Domain { shape, bounding_box: bbox, label, is_exact: true, features: Vec::new() };
    domain.features = domain.compute_features();
    Ok(domain)
}

/// Graded boundary samples of `y = x^p` on `(0, 1]`, dense near the tip.
fn cusp_polygon(p: f64) -> Result<PolygonShape> {
    let mut xs: Vec<f64> = (0..=120).map(|k| 10f64.powf(-6.0 + 6.0 * k as f64 / 120.0)).collect();
    xs.extend((1..50).map(|k| k as f64 / 50.0));
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut outer = vec![Point::new(0.0, 0.0)];
    outer.extend(xs.iter().map(|&x| Point::new(x, -x.powf(p))));
    outer.extend(xs.iter().rev().map(|&x| Point::new(x, x.powf(p))));
    PolygonShape::new(outer, vec![])
}

impl Domain {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bounding_box(&self) -> Rect {
        self.bounding_box
    }

    /// Whether `signed_distance` is exact (always true for the built-ins).
    pub fn is_exact(&self) -> bool {
        self.is_exact
    }

    /// Replaces the bounding box, e.g. to study an unbounded domain in a larger window.
    pub fn with_bounding_box(mut self, bbox: Rect) -> Self {
        self.bounding_box = bbox;
        self
    }

    pub fn features(&self) -> &[BoundaryFeature] {
        &self.features
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        match &self.shape {
            Shape::HalfPlane => p.y,
            Shape::Disk { radius } => radius - p.norm(),
            Shape::Square { half } => {
                let dx = p.x.abs() - half;
                let dy = p.y.abs() - half;
                if dx < 0.0 && dy < 0.0 {
                    -dx.max(dy)
                } else {
                    -dx.max(0.0).hypot(dy.max(0.0))
                }
            }
            Shape::SlitDisk { radius, tip } => {
                let circle = radius - p.norm();
                if circle <= 0.0 {
                    return circle;
                }
                let slit = dist_point_segment(p, *tip, Point::new(*radius, 0.0));
                circle.min(slit)
            }
            Shape::IntroLipschitz => intro_signed_distance(p),
            Shape::Polygon(poly) => poly.signed_distance(p),
        }
    }

    /// `d(x) = dist(x, boundary)`, from either side.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.signed_distance(p).abs()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.signed_distance(p) > 0.0
    }

    fn compute_features(&self) -> Vec<BoundaryFeature> {
        match &self.shape {
            Shape::HalfPlane | Shape::Disk { .. } | Shape::Square { .. } => Vec::new(),
            Shape::SlitDisk { tip, .. } => vec![BoundaryFeature {
                point: *tip,
                axis: Point::new(1.0, 0.0),
                kind: FeatureKind::Wedge { half_angle: 0.0 },
            }],
            Shape::IntroLipschitz => {
                // complement wedge above the corner, between directions 0 and 3pi/4
                let dir = 3.0 * PI / 8.0;
                vec![BoundaryFeature {
                    point: Point::new(0.0, 1.0),
                    axis: Point::new(dir.cos(), dir.sin()),
                    kind: FeatureKind::Wedge { half_angle: 3.0 * PI / 8.0 },
                }]
            }
            Shape::Polygon(poly) => polygon_features(poly, |p| self.signed_distance(p)),
        }
    }
}

fn intro_signed_distance(p: Point) -> f64 {
    let corner = Point::new(0.0, 1.0);
    let top = dist_point_ray(p, corner, Point::new(1.0, 0.0))
        .min(dist_point_ray(p, corner, Point::new(-FRAC_PI_4.cos(), FRAC_PI_4.sin())));
    let height = if p.x >= 0.0 { 1.0 } else { 1.0 - p.x };
    if p.y <= 0.0 {
        p.y
    } else if p.y < height {
        p.y.min(top)
    } else {
        -top
    }
}

fn polygon_features(poly: &PolygonShape, sd: impl Fn(Point) -> f64) -> Vec<BoundaryFeature> {
    let mut out = Vec::new();
    for l in poly.loops() {
        let n = l.len();
        for i in 0..n {
            let v = l[i];
            let a = l[(i + n - 1) % n] - v;
            let b = l[(i + 1) % n] - v;
            let reach = a.norm().min(b.norm());
            let (a, b) = (a.normalized(), b.normalized());
            let theta = a.dot(b).clamp(-1.0, 1.0).acos();
            if theta > PI - 1e-9 {
                continue;
            }
            let axis = (a + b).normalized();
            let inside = sd(v + axis * (1e-6 * reach)) > 0.0;
            if !inside {
                out.push(BoundaryFeature { point: v, axis, kind: FeatureKind::Wedge { half_angle: theta / 2.0 } });
            } else if theta < PI / 6.0 {
                out.push(BoundaryFeature { point: v, axis, kind: FeatureKind::Spike });
            }
        }
    }
    out
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::HalfPlane => write!(f, "half_plane"),
            DomainSpec::Disk { radius } => write!(f, "disk:{radius}"),
            DomainSpec::Square { side } => write!(f, "square:{side}"),
            DomainSpec::LShape { horizontal, vertical } => write!(f, "l_shape:{horizontal},{vertical}"),
            DomainSpec::SlitDisk { radius, slit } => write!(f, "slit_disk:{radius},{slit}"),
            DomainSpec::Cusp { exponent } => write!(f, "cusp:{exponent}"),
            DomainSpec::IntroLipschitz => write!(f, "intro_lipschitz"),
            DomainSpec::Polygon { holes, .. } => write!(f, "polygon({} holes)", holes.len()),
        }
    }
}

impl std::str::FromStr for DomainSpec {
    type Err = Error;

    /// Parses the inline form `name[:p1,p2,...]`, e.g. `disk:1` or `slit_disk:1,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let nums: Vec<f64> = if params.is_empty() {
            Vec::new()
        } else {
            params
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?
        };
        let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
        let spec = match name {
            "half_plane" => DomainSpec::HalfPlane,
            "disk" => DomainSpec::Disk { radius: arg(0, 1.0) },
            "square" => DomainSpec::Square { side: arg(0, 2.0) },
            "l_shape" => DomainSpec::LShape { horizontal: arg(0, 2.0), vertical: arg(1, arg(0, 2.0)) },
            "slit_disk" => {
                let r = arg(0, 1.0);
                DomainSpec::SlitDisk { radius: r, slit: arg(1, r) }
            }
            "cusp" => DomainSpec::Cusp { exponent: arg(0, 4.0) },
            "intro_lipschitz" => DomainSpec::IntroLipschitz,
            other => return Err(Error::Parse(format!("unknown built-in domain {other:?}"))),
        };
        Ok(spec)
    }
}
