//! Minimal static SVG figures: cubes as rectangles, curves as polylines and the
//! domain boundary as the `sd = 0` contour traced by marching squares.

use std::fmt::Write;

use qhbmo::{Domain, Point, Rect};

const SIZE: f64 = 800.0;
/// Contour grid cells per side.
const CONTOUR_CELLS: usize = 256;

pub struct Figure {
    view: Rect,
    body: String,
}

impl Figure {
    pub fn new(view: Rect) -> Self {
        Figure { view, body: String::new() }
    }

    fn px(&self, p: Point) -> (f64, f64) {
        let s = SIZE / self.view.width().max(self.view.height());
        ((p.x - self.view.min.x) * s, (self.view.max.y - p.y) * s)
    }

    pub fn rect(&mut self, r: &Rect, fill: &str, stroke: &str) {
        let (x0, y0) = self.px(Point::new(r.min.x, r.max.y));
        let (x1, y1) = self.px(Point::new(r.max.x, r.min.y));
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="{fill}" stroke="{stroke}" stroke-width="0.3"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn polyline(&mut self, pts: &[Point], stroke: &str, width: f64) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    }

    pub fn dot(&mut self, p: Point, fill: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{fill}"/>"#);
    }

    /// Segments of the zero level set of `sd` over the view.
    pub fn boundary(&mut self, domain: &Domain) {
        let n = CONTOUR_CELLS;
        let (w, h) = (self.view.width() / n as f64, self.view.height() / n as f64);
        let at = |i: usize, j: usize| Point::new(self.view.min.x + i as f64 * w, self.view.min.y + j as f64 * h);
        let sd: Vec<f64> = (0..=n).flat_map(|j| (0..=n).map(move |i| (i, j))).map(|(i, j)| domain.signed_distance(at(i, j))).collect();
        let v = |i: usize, j: usize| sd[j * (n + 1) + i];
        let mut segs = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let mut cross = Vec::new();
                for k in 0..4 {
                    let (a, b) = (corners[k], corners[(k + 1) % 4]);
                    let (va, vb) = (v(a.0, a.1), v(b.0, b.1));
                    if (va > 0.0) != (vb > 0.0) {
                        let t = va / (va - vb);
                        cross.push(at(a.0, a.1).lerp(at(b.0, b.1), t));
                    }
                }
                // saddle cells give four crossings; pair them in edge order
                for pair in cross.chunks_exact(2) {
                    segs.push((pair[0], pair[1]));
                }
            }
        }
        for (a, b) in segs {
            self.polyline(&[a, b], "black", 1.2);
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

/// Blue–white–red ramp over `[lo, hi]`.
pub fn heat(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (255.0 * s, 255.0 * s, 255.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (255.0, 255.0 * s, 255.0 * s)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qhbmo::make_domain;

    #[test]
    fn circle_contour_lies_on_the_circle() {
        let d = make_domain(&"disk:1".parse().unwrap()).unwrap();
        let mut f = Figure::new(Rect::square(Point::new(0.0, 0.0), 1.5));
        f.boundary(&d);
        let svg = f.finish();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.matches("<polyline").count() > 100);
    }

    #[test]
    fn heat_ramp_ends() {
        assert_eq!(heat(0.0, 0.0, 1.0), "rgb(0,0,255)");
        assert_eq!(heat(1.0, 0.0, 1.0), "rgb(255,0,0)");
        assert_eq!(heat(0.5, 0.0, 1.0), "rgb(255,255,255)");
    }
}
