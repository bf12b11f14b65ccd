//! Subcommand implementations: each writes its CSV tables (and an SVG where a
//! figure makes sense) into the output directory and returns a summary line.

use std::path::Path;

use qhbmo::bmo::{bmo_homogeneous_norm, bmo_lambda_norm, bmo_local_surrogate, bmo_rn_abc, gen_qh_function, CellKind};
use qhbmo::cigar::PairKind;
use qhbmo::extension::{counterexample_experiment, operator_norm_experiment, window_suite};
use qhbmo::qhyper::{segment_qh, DEFAULT_TOL};
use qhbmo::{build_whitney, classify, extend, lambda_max, Domain, GridFunction, MatchPolicy, Point, Rect, Tag, Window};

use crate::args::{self, FunctionSpec};
use crate::emit::{num, opt, Table};
use crate::svg::{heat, Figure};
use crate::{CliError, Command, Common};

pub fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Decompose { common } => decompose(&common),
        Command::Geodesic { common, from, to } => geodesic(&common, &from, &to),
        Command::Classify { common, delta, pairs } => classify_cmd(&common, delta, pairs),
        Command::Norm { common, function, lambda, kind } => norm(&common, &function, lambda, &kind),
        Command::Extend { common, function, lambda, epsilon, delta, best_effort, mode, values } => {
            let policy = if best_effort { MatchPolicy::BestEffort } else { MatchPolicy::Strict };
            match mode.as_str() {
                "single" => extend_single(&common, &function, lambda, epsilon, delta, policy),
                "operator" => extend_operator(&common, lambda, epsilon, delta, values.as_deref()),
                "counterexample" => extend_counterexample(&common, lambda, values.as_deref()),
                other => Err(CliError::Usage(format!("unknown extend mode {other:?}; expected single, operator or counterexample"))),
            }
        }
        Command::Report { dir, out } => report(dir.as_deref().unwrap_or(&out)),
    }
}

struct Setup {
    domain: Domain,
    window: Window,
    h: f64,
    level: u8,
}

fn setup(c: &Common) -> Result<Setup, CliError> {
    let domain = args::domain(&c.domain)?;
    let window = args::window(c.window.as_deref(), &domain)?;
    let (h, level) = args::resolution(&c.resolution, &window)?;
    Ok(Setup { domain, window, h, level })
}

fn write_svg(dir: &Path, file: &str, fig: Figure) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(file), fig.finish())?;
    Ok(())
}

fn decompose(c: &Common) -> Result<String, CliError> {
    let s = setup(c)?;
    let dec = build_whitney(&s.domain, s.window, s.level)?;
    let mut t = Table::new(
        "decompose",
        &["level", "i", "j", "tag", "x_min", "y_min", "side", "dist_lo", "dist_hi", "resolution", "error"],
    );
    let mut fig = Figure::new(s.window.rect());
    for q in dec.cubes() {
        let r = s.window.cube_rect(&q.cube);
        t.push(vec![
            q.cube.level.to_string(),
            q.cube.i.to_string(),
            q.cube.j.to_string(),
            q.tag.as_str().into(),
            num(r.min.x),
            num(r.min.y),
            num(q.side),
            num(q.dist_lo),
            num(q.dist_hi),
            num(s.h),
            num(q.dist_hi - q.dist_lo),
        ]);
        fig.rect(&r, if q.tag == Tag::Interior { "#cfe3f7" } else { "#e4e4e4" }, "#555");
    }
    for f in dec.frontier() {
        fig.rect(&s.window.cube_rect(f), "#f4b6b6", "none");
    }
    fig.boundary(&s.domain);
    t.write(&c.out, "decompose.csv")?;
    write_svg(&c.out, "decompose.svg", fig)?;
    let (lo, hi) = dec.wc2_extremes();
    Ok(format!(
        "decompose {}: {} cubes ({} E, {} E'), {} frontier cells, dist/side in [{lo:.4}, {hi:.4}]",
        s.domain.label(),
        dec.cubes().len(),
        dec.interior_cubes().count(),
        dec.exterior_cubes().count(),
        dec.frontier().len()
    ))
}

fn geodesic(c: &Common, from: &str, to: &str) -> Result<String, CliError> {
    let s = setup(c)?;
    let (x, y) = (args::point(from)?, args::point(to)?);
    let g = qhbmo::qh_distance(&s.domain, x, y, s.h)?;
    let mut t = Table::new("geodesic", &["index", "x", "y", "cum_qh", "resolution", "error"]);
    let (mut cum, mut err) = (0.0, 0.0);
    let pts = g.path.points();
    for (k, p) in pts.iter().enumerate() {
        if k > 0 {
            let q = segment_qh(&s.domain, pts[k - 1], *p, DEFAULT_TOL)?;
            cum += q.value;
            err += q.error;
        }
        t.push(vec![k.to_string(), num(p.x), num(p.y), num(cum), num(s.h), num(err)]);
    }
    t.write(&c.out, "geodesic.csv")?;
    let view = Rect::spanning(x, y).expanded(0.25 * x.dist(y).max(s.h)).intersection(&s.window.rect()).unwrap_or(s.window.rect());
    let mut fig = Figure::new(view);
    fig.boundary(&s.domain);
    fig.polyline(pts, "#c0392b", 2.0);
    fig.dot(x, "black");
    fig.dot(y, "black");
    write_svg(&c.out, "geodesic.svg", fig)?;
    Ok(format!(
        "geodesic: k = {:.6} (+{:.1e}), lattice {:.6}, {} vertices, h = {}",
        g.value,
        g.error,
        g.graph_value,
        pts.len(),
        s.h
    ))
}

fn classify_cmd(c: &Common, delta: f64, pairs: usize) -> Result<String, CliError> {
    let s = setup(c)?;
    let r = classify(&s.domain, delta, pairs, s.h, c.seed)?;
    let mut t = Table::new(
        "classify-pairs",
        &[
            "kind", "feature", "t", "x1", "y1", "x2", "y2", "separation", "epsilon", "a", "b", "j", "k", "resolution", "error",
        ],
    );
    for p in &r.pairs {
        let (kind, feature, tt) = match p.kind {
            PairKind::Random => ("random", "NA".to_string(), "NA".to_string()),
            PairKind::Adversarial { feature, t } => ("adversarial", feature.to_string(), num(t)),
        };
        t.push(vec![
            kind.into(),
            feature,
            tt,
            num(p.x.x),
            num(p.x.y),
            num(p.y.x),
            num(p.y.y),
            num(p.separation),
            num(p.epsilon),
            num(p.a),
            num(p.b),
            num(p.j),
            num(p.k),
            num(r.resolution),
            num(p.k_error),
        ]);
    }
    t.write(&c.out, "classify_pairs.csv")?;
    let mut sum = Table::new("classify-summary", &["key", "value", "coarse", "fine", "stable", "resolution", "error"]);
    let row = |k: &str, v: String, co: String, fi: String, st: String| vec![k.into(), v, co, fi, st, num(r.resolution), "NA".into()];
    sum.push(row("verdict", r.verdict.as_str().into(), "NA".into(), "NA".into(), "NA".into()));
    sum.push(row("delta", num(r.delta), "NA".into(), "NA".into(), "NA".into()));
    sum.push(row("pairs", r.pair_count.to_string(), "NA".into(), "NA".into(), "NA".into()));
    sum.push(row("flagged", r.flagged.to_string(), "NA".into(), "NA".into(), "NA".into()));
    for st in &r.stability {
        sum.push(row(st.name, num(st.fine), num(st.coarse), num(st.fine), st.stable.to_string()));
    }
    for sw in &r.sweeps {
        let last = sw.steps.last().map_or(f64::NAN, |s| s.1);
        sum.push(row(&format!("sweep{}", sw.feature), num(last), "NA".into(), "NA".into(), sw.diverging.to_string()));
    }
    sum.write(&c.out, "classify_summary.csv")?;
    let mut fig = Figure::new(s.window.rect());
    fig.boundary(&s.domain);
    for p in &r.worst_pairs {
        fig.polyline(p.witness.points(), "#c0392b", 1.5);
        fig.dot(p.x, "black");
        fig.dot(p.y, "black");
    }
    write_svg(&c.out, "classify.svg", fig)?;
    Ok(format!(
        "classify {}: {} (ε̂ = {:.4}, a = {:.3}, b = {:.3}, c = {}, d = {:.3}; {} pairs, {} flagged)",
        s.domain.label(),
        r.verdict.as_str(),
        r.epsilon_hat,
        r.ab_hat.0,
        r.ab_hat.1,
        r.cd_hat.0,
        r.cd_hat.1,
        r.pair_count,
        r.flagged
    ))
}

fn grid_function(spec: &FunctionSpec, domain: &Domain, window: Window, level: u8) -> Result<GridFunction, CliError> {
    let sample = |f: &(dyn Fn(Point) -> f64 + Sync)| GridFunction::sample(domain, window, level, f);
    let g = match *spec {
        FunctionSpec::Const(c) => sample(&|_| c)?,
        FunctionSpec::X => sample(&|p| p.x)?,
        FunctionSpec::Y => sample(&|p| p.y)?,
        FunctionSpec::XPlus2Y => sample(&|p| p.x + 2.0 * p.y)?,
        FunctionSpec::Saddle => sample(&|p| p.x * p.x - p.y * p.y)?,
        FunctionSpec::PositivePart => sample(&|p| p.x.max(0.0))?,
        FunctionSpec::Sign => sample(&|p| {
            let t = p.y - p.x;
            if t == 0.0 {
                0.0
            } else {
                t.signum()
            }
        })?,
        FunctionSpec::LogDistance => sample(&|p| domain.distance_to_boundary(p).ln())?,
        FunctionSpec::Qh(a) => gen_qh_function(domain, a, window, level)?,
    };
    Ok(g)
}

fn norm(c: &Common, function: &str, lambda: f64, kind: &str) -> Result<String, CliError> {
    let s = setup(c)?;
    let spec = args::function(function)?;
    let f = grid_function(&spec, &s.domain, s.window, s.level)?;
    let r = match kind {
        "bmo-lambda" => bmo_lambda_norm(&f, &s.domain, lambda)?,
        "bmo" => bmo_homogeneous_norm(&f, &s.domain),
        "local" => bmo_local_surrogate(&f, &s.domain),
        "abc" => bmo_rn_abc(&f, lambda)?,
        other => return Err(CliError::Usage(format!("unknown norm kind {other:?}; expected bmo-lambda, bmo, local or abc"))),
    };
    let mut t = Table::new(
        "norm",
        &[
            "function",
            "kind",
            "lambda",
            "value",
            "small_scale",
            "large_scale",
            "attaining",
            "degenerate",
            "excluded_fraction",
            "cubes_swept",
            "a",
            "b",
            "c",
            "resolution",
            "error",
        ],
    );
    let (a, b, cc) = r.abc.map_or((None, None, None), |(a, b, c)| (Some(a), Some(b), Some(c)));
    t.push(vec![
        function.into(),
        kind.into(),
        opt(r.lambda),
        num(r.value),
        num(r.small_scale_part),
        num(r.large_scale_part),
        r.attaining_cube.map_or("NA".into(), |q| format!("{}:{}:{}", q.level, q.i, q.j)),
        r.degenerate.to_string(),
        num(r.excluded_fraction),
        r.cubes_swept.to_string(),
        opt(a),
        opt(b),
        opt(cc),
        num(s.h),
        "NA".into(),
    ]);
    t.write(&c.out, "norm.csv")?;
    Ok(format!(
        "norm {kind} of {function} on {}: {:.6} (small {:.6}, large {:.6}{}), {:.2}% cells excluded",
        s.domain.label(),
        r.value,
        r.small_scale_part,
        r.large_scale_part,
        if r.degenerate { ", degenerate" } else { "" },
        100.0 * r.excluded_fraction
    ))
}

fn extend_single(
    c: &Common,
    function: &str,
    lambda: Option<f64>,
    epsilon: f64,
    delta: f64,
    policy: MatchPolicy,
) -> Result<String, CliError> {
    let s = setup(c)?;
    let lambda = match lambda {
        Some(l) => l,
        None => lambda_max(epsilon, delta, 2)?,
    };
    let f = grid_function(&args::function(function)?, &s.domain, s.window, s.level)?;
    let dec = build_whitney(&s.domain, s.window, s.level)?;
    let r = extend(&f, &s.domain, &dec, lambda, epsilon, delta, policy)?;
    let n = f.n();
    let mut source = vec!["frontier"; n * n];
    let mut mark = |q: &qhbmo::DyadicCube, label: &'static str| {
        let ((x0, x1), (y0, y1)) = q.extent_at(s.level);
        for j in y0 as usize..y1 as usize {
            for i in x0 as usize..x1 as usize {
                source[j * n + i] = label;
            }
        }
    };
    for (q, _) in &r.assignment {
        mark(q, "matched");
    }
    for q in &r.zero_region {
        mark(q, "zero");
    }
    for (k, m) in f.mask().iter().enumerate() {
        if *m == CellKind::Inside {
            source[k] = "inside";
        }
    }
    let mut grid = Table::new("extend-grid", &["i", "j", "x", "y", "value", "source", "resolution", "error"]);
    for (k, &v) in r.extended.values().iter().enumerate() {
        let p = f.cell_center(k);
        grid.push(vec![(k % n).to_string(), (k / n).to_string(), num(p.x), num(p.y), num(v), source[k].into(), num(s.h), "NA".into()]);
    }
    grid.write(&c.out, "extend_grid.csv")?;
    let mut asg = Table::new(
        "extend-assignment",
        &["level", "i", "j", "star_level", "star_i", "star_j", "value", "fallback", "resolution", "error"],
    );
    for (q, star) in &r.assignment {
        asg.push(vec![
            q.level.to_string(),
            q.i.to_string(),
            q.j.to_string(),
            star.level.to_string(),
            star.i.to_string(),
            star.j.to_string(),
            num(f.cube_average(star)?),
            r.fallback.contains(q).to_string(),
            num(s.h),
            "NA".into(),
        ]);
    }
    asg.write(&c.out, "extend_assignment.csv")?;
    let mut sum = Table::new("extend-summary", &["key", "value", "resolution", "error"]);
    for (k, v) in [
        ("function", function.to_string()),
        ("lambda", num(lambda)),
        ("lambda_max", num(lambda_max(epsilon, delta, 2)?)),
        ("input_norm", num(r.input_norm())),
        ("output_norm", num(r.output_norm())),
        ("ratio", opt(r.ratio())),
        ("matched_cubes", r.assignment.len().to_string()),
        ("zero_cubes", r.zero_region.len().to_string()),
        ("fallback_cubes", r.fallback.len().to_string()),
        ("frontier_cells", r.frontier_cells.to_string()),
    ] {
        sum.push(vec![k.into(), v, num(s.h), "NA".into()]);
    }
    sum.write(&c.out, "extend_summary.csv")?;
    // heatmap at no more than 256 cells per side
    let shown = s.level.min(8);
    let m = 1u64 << shown;
    let avgs: Vec<(Rect, f64)> = (0..m * m)
        .map(|k| {
            let q = qhbmo::DyadicCube { level: shown, i: k % m, j: k / m };
            (s.window.cube_rect(&q), r.extended.cube_average(&q).unwrap_or(f64::NAN))
        })
        .collect();
    let (lo, hi) = avgs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, v)| (a.min(*v), b.max(*v)));
    let mut fig = Figure::new(s.window.rect());
    for (rect, v) in &avgs {
        fig.rect(rect, &heat(*v, lo, hi), "none");
    }
    fig.boundary(&s.domain);
    write_svg(&c.out, "extend.svg", fig)?;
    Ok(format!(
        "extend {function} on {}: λ = {lambda:.4e}{}, ‖f‖ = {:.6}, ‖Tf‖ = {:.6}, ratio {}; {} matched, {} zero, {} fallback cubes",
        s.domain.label(),
        if r.above_lambda_max { " (above λ_max)" } else { "" },
        r.input_norm(),
        r.output_norm(),
        opt(r.ratio()),
        r.assignment.len(),
        r.zero_region.len(),
        r.fallback.len()
    ))
}

fn extend_operator(c: &Common, lambda: Option<f64>, epsilon: f64, delta: f64, values: Option<&str>) -> Result<String, CliError> {
    let s = setup(c)?;
    let base = match lambda {
        Some(l) => l,
        None => lambda_max(epsilon, delta, 2)?,
    };
    let multiples = args::list(values.unwrap_or("1,0.5,0.25"))?;
    let lambdas: Vec<f64> = multiples.iter().map(|m| m * base).collect();
    let dec = build_whitney(&s.domain, s.window, s.level)?;
    let suite = window_suite(&s.domain, &dec, s.level, c.seed)?;
    let table = operator_norm_experiment(&s.domain, &dec, &suite, &lambdas, epsilon, delta)?;
    let mut t = Table::new(
        "extend-operator",
        &["lambda", "function", "input_norm", "output_norm", "ratio", "fallback_cubes", "frontier_cells", "resolution", "error"],
    );
    for r in &table.rows {
        t.push(vec![
            num(r.lambda),
            r.function.clone(),
            num(r.input_norm),
            num(r.output_norm),
            opt(r.ratio),
            r.fallback_cubes.to_string(),
            r.frontier_cells.to_string(),
            num(s.h),
            "NA".into(),
        ]);
    }
    t.write(&c.out, "operator.csv")?;
    let maxima: Vec<String> = table.max_ratios().iter().map(|(l, r)| format!("λ={l:.3e}: {}", opt(*r))).collect();
    Ok(format!("operator norms on {}: max ratios {}; spread {}", s.domain.label(), maxima.join(", "), opt(table.spread())))
}

fn extend_counterexample(c: &Common, lambda: Option<f64>, values: Option<&str>) -> Result<String, CliError> {
    let domain = args::domain(&c.domain)?;
    let sizes = args::list(values.unwrap_or("4,16,64"))?;
    let lambda = lambda.unwrap_or(2.0);
    let probe = Window::centered(Point::new(0.0, 0.0), sizes[0])?;
    let (h, _) = args::resolution(&c.resolution, &probe)?;
    let rows = counterexample_experiment(&domain, &sizes, lambda, h)?;
    let mut t = Table::new(
        "extend-counterexample",
        &["window_size", "lambda", "input_norm", "output_norm", "ratio", "fallback_cubes", "resolution", "error"],
    );
    for r in &rows {
        t.push(vec![
            num(r.window_size),
            num(r.lambda),
            num(r.input_norm),
            num(r.output_norm),
            opt(r.ratio),
            r.fallback_cubes.to_string(),
            num(r.resolution),
            "NA".into(),
        ]);
    }
    t.write(&c.out, "counterexample.csv")?;
    let ratios: Vec<String> = rows.iter().map(|r| format!("R={}: {}", r.window_size, opt(r.ratio))).collect();
    Ok(format!("counterexample on {} at λ = {lambda}: {}", domain.label(), ratios.join(", ")))
}

fn fmax(v: &[f64]) -> f64 {
    v.iter().copied().filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, f64::max)
}

fn fmin(v: &[f64]) -> f64 {
    v.iter().copied().filter(|x| !x.is_nan()).fold(f64::INFINITY, f64::min)
}

/// Recomputes headline numbers from each experiment CSV found in `dir`.
fn report(dir: &Path) -> Result<String, CliError> {
    let mut t = Table::new("report", &["experiment", "metric", "value", "source"]);
    let mut push = |e: &str, m: &str, v: String, src: &str| t.push(vec![e.into(), m.into(), v, src.into()]);
    let mut found = 0;
    let file = |name: &str| -> Result<Option<Table>, CliError> {
        let p = dir.join(name);
        if p.is_file() {
            Ok(Some(Table::read(&p)?))
        } else {
            Ok(None)
        }
    };
    if let Some(d) = file("decompose.csv")? {
        found += 1;
        let tags = d.column("tag")?;
        let side = d.floats("side")?;
        let lo: Vec<f64> = d.floats("dist_lo")?.iter().zip(&side).map(|(a, s)| a / s).collect();
        let hi: Vec<f64> = d.floats("dist_hi")?.iter().zip(&side).map(|(a, s)| a / s).collect();
        push("decompose", "cubes", d.rows.len().to_string(), "decompose.csv");
        push("decompose", "interior_cubes", d.rows.iter().filter(|r| r[tags] == "E").count().to_string(), "decompose.csv");
        push("decompose", "exterior_cubes", d.rows.iter().filter(|r| r[tags] == "E'").count().to_string(), "decompose.csv");
        push("decompose", "dist_over_side_min", num(fmin(&lo)), "decompose.csv");
        push("decompose", "dist_over_side_max", num(fmax(&hi)), "decompose.csv");
    }
    if let Some(g) = file("geodesic.csv")? {
        found += 1;
        let cum = g.floats("cum_qh")?;
        let err = g.floats("error")?;
        push("geodesic", "qh_length", num(*cum.last().unwrap_or(&f64::NAN)), "geodesic.csv");
        push("geodesic", "error_bound", num(*err.last().unwrap_or(&f64::NAN)), "geodesic.csv");
    }
    if let Some(p) = file("classify_pairs.csv")? {
        found += 1;
        push("classify", "epsilon_min", num(fmin(&p.floats("epsilon")?)), "classify_pairs.csv");
        push("classify", "pairs_evaluated", p.rows.len().to_string(), "classify_pairs.csv");
    }
    if let Some(s) = file("classify_summary.csv")? {
        let (k, v) = (s.column("key")?, s.column("value")?);
        if let Some(r) = s.rows.iter().find(|r| r[k] == "verdict") {
            push("classify", "verdict", r[v].clone(), "classify_summary.csv");
        }
    }
    if let Some(n) = file("norm.csv")? {
        found += 1;
        let (f, kind) = (n.column("function")?, n.column("kind")?);
        for (r, v) in n.rows.iter().zip(n.floats("value")?) {
            push("norm", &format!("{}[{}]", r[kind], r[f]), num(v), "norm.csv");
        }
    }
    if let Some(s) = file("extend_summary.csv")? {
        found += 1;
        let (k, v) = (s.column("key")?, s.column("value")?);
        for r in s.rows.iter().filter(|r| ["input_norm", "output_norm", "ratio"].contains(&r[k].as_str())) {
            push("extend", &r[k], r[v].clone(), "extend_summary.csv");
        }
    }
    if let Some(o) = file("operator.csv")? {
        found += 1;
        let lambdas = o.floats("lambda")?;
        let ratios = o.floats("ratio")?;
        let mut distinct: Vec<f64> = Vec::new();
        for &l in &lambdas {
            if !distinct.contains(&l) {
                distinct.push(l);
            }
        }
        let mut maxima = Vec::new();
        for l in distinct {
            let m = fmax(&lambdas.iter().zip(&ratios).filter(|(a, _)| **a == l).map(|(_, r)| *r).collect::<Vec<_>>());
            maxima.push(m);
            push("operator", &format!("max_ratio[lambda={}]", num(l)), num(m), "operator.csv");
        }
        push("operator", "spread", num(fmax(&maxima) / fmin(&maxima)), "operator.csv");
    }
    if let Some(ce) = file("counterexample.csv")? {
        found += 1;
        let sizes = ce.floats("window_size")?;
        let ratios = ce.floats("ratio")?;
        for (s, r) in sizes.iter().zip(&ratios) {
            push("counterexample", &format!("ratio[R={}]", num(*s)), num(*r), "counterexample.csv");
        }
        let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
        push("counterexample", "strictly_increasing", increasing.to_string(), "counterexample.csv");
    }
    if found == 0 {
        return Err(CliError::Usage(format!("no experiment CSV files in {}", dir.display())));
    }
    let rows = t.rows.len();
    t.write(dir, "report.csv")?;
    let mut out = format!("report over {} ({found} experiments, {rows} rows):", dir.display());
    for r in &t.rows {
        out.push_str(&format!("\n  {:<15} {:<32} {}", r[0], r[1], r[2]));
    }
    Ok(out)
}
