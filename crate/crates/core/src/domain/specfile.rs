//! Plain-text domain description.
//!
//! ```text
//! file     := line*
//! line     := blank | comment | entry
//! comment  := '#' any*
//! entry    := key '=' value
//! key      := "shape" | "radius" | "side" | "horizontal" | "vertical"
//!           | "slit" | "exponent" | "vertices" | "hole" | "bbox"
//! value    := shape-name | number | points | number{4}
//! points   := point (';' point)*
//! point    := number number
//! ```
//!
//! `shape` is one of the built-in names accepted by `DomainSpec::from_str`
//! or `polygon`. `hole` may repeat. `bbox = xmin ymin xmax ymax` overrides the
//! default bounding box.

use std::collections::HashMap;

use super::{make_domain, Domain, DomainSpec};
use crate::error::{Error, Result};
use crate::geom::{Point, Rect};

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
        .collect()
}

fn parse_points(s: &str) -> Result<Vec<Point>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| match parse_numbers(p)?.as_slice() {
            [x, y] => Ok(Point::new(*x, *y)),
            _ => Err(Error::Parse(format!("expected two coordinates in {p:?}"))),
        })
        .collect()
}

/// Parses a domain file and builds the domain it describes.
pub fn parse_spec_file(text: &str) -> Result<Domain> {
    let mut scalars: HashMap<String, String> = HashMap::new();
    let mut holes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "hole" => holes.push(parse_points(value)?),
            "shape" | "radius" | "side" | "horizontal" | "vertical" | "slit" | "exponent" | "vertices" | "bbox" => {
                if scalars.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(Error::Parse(format!("line {}: duplicate key {key}", lineno + 1)));
                }
            }
            other => return Err(Error::Parse(format!("line {}: unknown key {other:?}", lineno + 1))),
        }
    }
    let shape = scalars.get("shape").ok_or_else(|| Error::Parse("missing shape".into()))?;
    let num = |k: &str| -> Result<Option<f64>> {
        scalars
            .get(k)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("{k}: {e}"))))
            .transpose()
    };
    let spec = match shape.as_str() {
        "polygon" => {
            let outer = parse_points(scalars.get("vertices").ok_or_else(|| Error::Parse("polygon needs vertices".into()))?)?;
            DomainSpec::Polygon { outer, holes }
        }
        name => {
            let mut spec: DomainSpec = name.parse()?;
            match &mut spec {
                DomainSpec::Disk { radius } => *radius = num("radius")?.unwrap_or(*radius),
                DomainSpec::Square { side } => *side = num("side")?.unwrap_or(*side),
                DomainSpec::LShape { horizontal, vertical } => {
                    *horizontal = num("horizontal")?.unwrap_or(*horizontal);
                    *vertical = num("vertical")?.unwrap_or(*vertical);
                }
                DomainSpec::SlitDisk { radius, slit } => {
                    *radius = num("radius")?.unwrap_or(*radius);
                    *slit = num("slit")?.unwrap_or(*radius);
                }
                DomainSpec::Cusp { exponent } => *exponent = num("exponent")?.unwrap_or(*exponent),
                _ => {}
            }
            spec
        }
    };
    let mut domain = make_domain(&spec)?;
    if let Some(b) = scalars.get("bbox") {
        match parse_numbers(b)?.as_slice() {
            [x0, y0, x1, y1] if x1 > x0 && y1 > y0 => {
                domain = domain.with_bounding_box(Rect::new(Point::new(*x0, *y0), Point::new(*x1, *y1)));
            }
            _ => return Err(Error::Parse("bbox expects xmin ymin xmax ymax".into())),
        }
    }
    Ok(domain)
}
