use std::path::Path;
use std::process::{Command, Output};

fn qhbmo(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhbmo")).args(args).env("QHBMO_OUT", out).output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = qhbmo(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

/// Rows of a CSV file after the version line and header.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# qhbmo-csv v1 "));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn decompose_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["decompose", "--domain", "disk:1", "--resolution", "1/256"]);
    assert!(stdout.contains("cubes"));
    let (header, body) = rows(&dir.path().join("decompose.csv"));
    assert!(body.len() > 1000);
    for c in ["resolution", "error"] {
        assert!(header.iter().any(|h| h == c));
    }
    let svg = std::fs::read_to_string(dir.path().join("decompose.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<rect") && svg.contains("<polyline"));
}

#[test]
fn classify_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["classify", "--domain", "slit_disk", "--delta", "0.5", "--seed", "7", "--resolution", "1/32", "--pairs", "12"];
    let sa = ok(a.path(), &args);
    let sb = ok(b.path(), &args);
    assert_eq!(sa, sb);
    assert!(sa.contains("evidence-against"));
    for f in ["classify_pairs.csv", "classify_summary.csv", "classify.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn report_matches_the_experiment_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["decompose", "--domain", "l_shape", "--resolution", "1/64"]);
    ok(d, &["geodesic", "--domain", "half_plane", "--from", "0,1", "--to", "0,4", "--resolution", "1/64"]);
    ok(d, &["norm", "--function", "x", "--window", "0,0,2", "--resolution", "1/64", "--lambda", "0.25"]);
    ok(d, &["extend", "--mode", "counterexample", "--domain", "intro_lipschitz", "--resolution", "1/8", "--values", "4,8"]);
    ok(d, &["report"]);
    let (rh, report) = rows(&d.join("report.csv"));
    let (m, v) = (col(&rh, "metric"), col(&rh, "value"));
    let get = |metric: &str| report.iter().find(|r| r[m] == metric).map(|r| r[v].clone()).unwrap();

    let (h, cubes) = rows(&d.join("decompose.csv"));
    assert_eq!(get("cubes"), cubes.len().to_string());
    let tag = col(&h, "tag");
    assert_eq!(get("interior_cubes"), cubes.iter().filter(|r| r[tag] == "E").count().to_string());
    let ratio = |r: &Vec<String>, k: &str| r[col(&h, k)].parse::<f64>().unwrap() / r[col(&h, "side")].parse::<f64>().unwrap();
    let lo = cubes.iter().map(|r| ratio(r, "dist_lo")).fold(f64::INFINITY, f64::min);
    assert_eq!(get("dist_over_side_min").parse::<f64>().unwrap(), lo);
    assert!(lo >= 1.0 - 1e-9);

    let (h, verts) = rows(&d.join("geodesic.csv"));
    let last: f64 = verts.last().unwrap()[col(&h, "cum_qh")].parse().unwrap();
    assert_eq!(get("qh_length").parse::<f64>().unwrap(), last);
    assert!((last - 4f64.ln()).abs() < 0.03 * 4f64.ln());

    let (h, n) = rows(&d.join("norm.csv"));
    assert_eq!(get("bmo-lambda[x]"), n[0][col(&h, "value")]);

    let (h, ce) = rows(&d.join("counterexample.csv"));
    let ratios: Vec<f64> = ce.iter().map(|r| r[col(&h, "ratio")].parse().unwrap()).collect();
    assert_eq!(get("ratio[R=4]").parse::<f64>().unwrap(), ratios[0]);
    assert_eq!(get("strictly_increasing"), (ratios[1] > ratios[0]).to_string());
}

#[test]
fn extend_outputs_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["extend", "--function", "x", "--window", "1,0,0.0078125", "--resolution", "0.0078125/128"]);
    let (h, grid) = rows(&d.join("extend_grid.csv"));
    assert_eq!(grid.len(), 128 * 128);
    let (src, val) = (col(&h, "source"), col(&h, "value"));
    for r in grid.iter().filter(|r| r[src] == "inside") {
        // f = x on inside cells
        let x: f64 = r[col(&h, "x")].parse().unwrap();
        assert_eq!(r[val].parse::<f64>().unwrap(), x);
    }
    assert!(grid.iter().filter(|r| r[src] == "zero").all(|r| r[val] == "0"));
    let (_, asg) = rows(&d.join("extend_assignment.csv"));
    assert!(!asg.is_empty());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["decompose", "--domain", "moebius"],
        vec!["decompose", "--resolution", "1/100"],
        vec!["norm", "--function", "cos"],
        vec!["extend", "--mode", "bogus"],
        vec!["report"],
    ] {
        let o = qhbmo(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));
    }
}

#[test]
fn domain_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("square.dom");
    std::fs::write(&spec, "shape = polygon\nvertices = 0 0; 2 0; 2 2; 0 2\n").unwrap();
    let stdout = ok(dir.path(), &["decompose", "--domain", spec.to_str().unwrap(), "--window", "1,1,2", "--resolution", "1/32"]);
    assert!(stdout.contains("polygon"));
}
