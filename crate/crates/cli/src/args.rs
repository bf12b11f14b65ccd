//! Parsers for domain, point, window, resolution and function arguments.

use std::path::Path;

use qhbmo::domain::parse_spec_file;
use qhbmo::{make_domain, Domain, DomainSpec, Point, Window};

use crate::CliError;

/// `--domain` is either a path to a domain file or `name[:params]`.
pub fn domain(arg: &str) -> Result<Domain, CliError> {
    if Path::new(arg).is_file() {
        let text = std::fs::read_to_string(arg)?;
        return Ok(parse_spec_file(&text)?);
    }
    let spec: DomainSpec = arg.parse().map_err(|e| CliError::Usage(format!("--domain {arg}: {e}")))?;
    Ok(make_domain(&spec)?)
}

fn numbers(arg: &str, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = arg
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("{what} {arg:?}: {e}")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage(format!("{what} {arg:?}: expected {n} comma-separated numbers")));
    }
    Ok(v)
}

pub fn point(arg: &str) -> Result<Point, CliError> {
    let v = numbers(arg, 2, "point")?;
    Ok(Point::new(v[0], v[1]))
}

pub fn list(arg: &str) -> Result<Vec<f64>, CliError> {
    let n = arg.split(',').count();
    numbers(arg, n, "list")
}

/// `cx,cy,side`, or the square on the domain's bounding box when absent.
pub fn window(arg: Option<&str>, domain: &Domain) -> Result<Window, CliError> {
    match arg {
        Some(a) => {
            let v = numbers(a, 3, "window")?;
            Ok(Window::centered(Point::new(v[0], v[1]), v[2])?)
        }
        None => {
            let b = domain.bounding_box();
            Ok(Window::centered(b.center(), b.width().min(b.height()))?)
        }
    }
}

/// `1/256` or a decimal; must split the window side into `2^k` cells.
pub fn resolution(arg: &str, window: &Window) -> Result<(f64, u8), CliError> {
    let h = match arg.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim().parse().map_err(|_| CliError::Usage(format!("resolution {arg:?}")))?,
                b.trim().parse().map_err(|_| CliError::Usage(format!("resolution {arg:?}")))?,
            );
            a / b
        }
        None => arg.trim().parse().map_err(|_| CliError::Usage(format!("resolution {arg:?}")))?,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(CliError::Usage(format!("resolution must be positive, got {arg:?}")));
    }
    let level = window
        .level_for_cell_size(h)
        .ok_or_else(|| CliError::Usage(format!("resolution {arg} is not a dyadic fraction of the window side {}", window.side)))?;
    Ok((h, level))
}

/// Test functions available to `norm` and `extend`.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionSpec {
    Const(f64),
    X,
    Y,
    XPlus2Y,
    Saddle,
    PositivePart,
    Sign,
    LogDistance,
    /// `k_Ω(a, ·)`.
    Qh(Point),
}

pub fn function(arg: &str) -> Result<FunctionSpec, CliError> {
    let (name, param) = arg.split_once(':').map_or((arg, None), |(a, b)| (a, Some(b)));
    let f = match (name.trim(), param) {
        ("const", Some(c)) => FunctionSpec::Const(numbers(c, 1, "const")?[0]),
        ("x", None) => FunctionSpec::X,
        ("y", None) => FunctionSpec::Y,
        ("x+2y", None) => FunctionSpec::XPlus2Y,
        ("x^2-y^2", None) => FunctionSpec::Saddle,
        ("max-x", None) => FunctionSpec::PositivePart,
        ("sign", None) => FunctionSpec::Sign,
        ("log-d", None) => FunctionSpec::LogDistance,
        ("k", Some(a)) => FunctionSpec::Qh(point(a)?),
        _ => {
            return Err(CliError::Usage(format!(
                "unknown function {arg:?}; expected const:c, x, y, x+2y, x^2-y^2, max-x, sign, log-d or k:ax,ay"
            )))
        }
    };
    Ok(f)
}
