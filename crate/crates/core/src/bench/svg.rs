//! Small in-process SVG charts: line, scatter, heatmap and trajectory frames.

use std::fmt::Write;

use crate::landscape::SliceGrid;
use crate::sim::TrajectoryFile;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Header lines as XML comments (`--` is not allowed inside one).
fn comments(out: &mut String, header: &[String]) {
    for line in header {
        let safe = line.replace("--", "- -");
        let _ = writeln!(out, "<!-- {safe} -->");
    }
}

fn open(out: &mut String, width: f64, height: f64, header: &[String]) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    comments(out, header);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: ChartKind,
    pub log_x: bool,
    pub series: Vec<Series>,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= n as f64).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str, kind: ChartKind) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), kind, log_x: false, series: Vec::new() }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn with_series(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points });
        self
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| {
            x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0)
        });
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            let x = if self.log_x { x.log10() } else { x };
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return ((0.0, 1.0), (0.0, 1.0));
        }
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (y0, y1) = pad(y0, y1);
        let dy = 0.05 * (y1 - y0);
        (pad(x0, x1), (y0 - dy, y1 + dy))
    }

    pub fn render(&self, header: &[String]) -> String {
        let mut out = String::new();
        open(&mut out, WIDTH, HEIGHT, header);
        let (l, r, t, b) = MARGIN;
        let (pw, ph) = (WIDTH - l - r, HEIGHT - t - b);
        let ((x0, x1), (y0, y1)) = self.bounds();
        let sx = |x: f64| {
            let x = if self.log_x { x.log10() } else { x };
            l + (x - x0) / (x1 - x0) * pw
        };
        let sy = |y: f64| t + (y1 - y) / (y1 - y0) * ph;

        let _ = writeln!(out, r#"<text x="{}" y="16" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(out, r##"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
        for v in nice_ticks(y0, y1, 6) {
            let y = sy(v);
            let _ = writeln!(out, r##"<line x1="{l}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, l + pw);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 5.0, y + 4.0, fmt_tick(v));
        }
        let xticks: Vec<(f64, f64)> = if self.log_x {
            (x0.floor() as i32..=x1.ceil() as i32)
                .map(|e| 10f64.powi(e))
                .filter(|v| (x0..=x1).contains(&v.log10()))
                .map(|v| (sx(v), v))
                .collect()
        } else {
            nice_ticks(x0, x1, 6).into_iter().map(|v| (sx(v), v)).collect()
        };
        for (x, v) in xticks {
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{:.2}" stroke="#eee"/>"##, t + ph);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, t + ph + 16.0, fmt_tick(v));
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, l + pw / 2.0, HEIGHT - 10.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            t + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
                .map(|&(x, y)| (sx(x), sy(y)))
                .collect();
            match self.kind {
                ChartKind::Line => {
                    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
                }
                ChartKind::Scatter => {
                    for (x, y) in &pts {
                        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#);
                    }
                }
            }
            if s.label.is_empty() {
                continue;
            }
            let ly = t + 14.0 + 16.0 * k as f64;
            let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, l + pw - 150.0, ly - 9.0);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, l + pw - 135.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Blue → yellow ramp over `t ∈ [0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let f = t * (stops.len() - 1) as f64;
    let i = (f.floor() as usize).min(stops.len() - 2);
    let u = f - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heatmap of a slice grid. Every cell carries its exact loss in a
/// `data-loss` attribute.
pub fn heatmap(grid: &SliceGrid, title: &str, header: &[String]) -> String {
    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, header);
    let n = grid.resolution();
    let (l, t) = (MARGIN.0, MARGIN.2);
    let side = (HEIGHT - MARGIN.2 - MARGIN.3).min(WIDTH - l - 120.0);
    let cell = side / n as f64;
    let finite: Vec<f64> = grid.losses.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let _ = writeln!(out, r#"<text x="{}" y="16" text-anchor="middle" font-size="14">{}</text>"#, l + side / 2.0, escape(title));
    for i in 0..n {
        for j in 0..n {
            let v = grid.at(i, j);
            // alpha runs along x, beta up the y axis
            let x = l + i as f64 * cell;
            let y = t + (n - 1 - j) as f64 * cell;
            let fill = if v.is_finite() { ramp((v - lo) / span) } else { "#888888".to_string() };
            let _ = writeln!(
                out,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}" data-loss="{v}"/>"#,
                cell + 0.05,
                cell + 0.05
            );
        }
    }
    let (a0, a1) = (grid.alphas[0], grid.alphas[n - 1]);
    let (b0, b1) = (grid.betas[0], grid.betas[n - 1]);
    let _ = writeln!(out, r#"<text x="{l}" y="{:.2}">α = {}</text>"#, t + side + 16.0, fmt_tick(a0));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l + side, t + side + 16.0, fmt_tick(a1));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">β = {}</text>"#, l - 4.0, t + side, fmt_tick(b0));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 4.0, t + 10.0, fmt_tick(b1));
    let bx = l + side + 30.0;
    for k in 0..50 {
        let y = t + side - (k + 1) as f64 * side / 50.0;
        let _ = writeln!(out, r#"<rect x="{bx:.2}" y="{y:.2}" width="16" height="{:.3}" fill="{}"/>"#, side / 50.0 + 0.05, ramp(k as f64 / 49.0));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 22.0, t + side, fmt_tick(lo));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 22.0, t + 10.0, fmt_tick(hi));
    out.push_str("</svg>\n");
    out
}

/// Maps world coordinates (y up) to pixels (y down) with uniform scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub min: [f64; 2],
    pub scale: f64,
    pub width: f64,
    pub height: f64,
    pub pad: f64,
}

impl Viewport {
    /// Fits every node (and object extent) of every frame.
    pub fn fit(file: &TrajectoryFile, width: f64, height: f64) -> Self {
        let pad = 20.0;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        let mut grow = |p: [f64; 2], r: f64| {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d] - r);
                hi[d] = hi[d].max(p[d] + r);
            }
        };
        for f in &file.frames {
            for p in &f.positions {
                grow(*p, 0.0);
            }
            if let (Some((c, _)), Some((a, _))) = (f.ellipse, file.ellipse_axes) {
                grow(c, a);
            }
        }
        lo[1] = lo[1].min(0.0); // keep the ground in view
        let span = [(hi[0] - lo[0]).max(1e-6), (hi[1] - lo[1]).max(1e-6)];
        let scale = ((width - 2.0 * pad) / span[0]).min((height - 2.0 * pad) / span[1]);
        Self { min: lo, scale, width, height, pad }
    }

    pub fn to_screen(&self, p: [f64; 2]) -> [f64; 2] {
        [self.pad + (p[0] - self.min[0]) * self.scale, self.height - self.pad - (p[1] - self.min[1]) * self.scale]
    }

    pub fn to_world(&self, s: [f64; 2]) -> [f64; 2] {
        [self.min[0] + (s[0] - self.pad) / self.scale, self.min[1] + (self.height - self.pad - s[1]) / self.scale]
    }
}

/// One trajectory frame. Nodes are `<circle data-node=...>` elements.
pub fn trajectory_frame(file: &TrajectoryFile, frame: usize, view: &Viewport, header: &[String]) -> String {
    let f = &file.frames[frame];
    let mut out = String::new();
    open(&mut out, view.width, view.height, header);
    let ground = view.to_screen([0.0, 0.0])[1];
    let _ = writeln!(
        out,
        r##"<line x1="0" y1="{ground:.4}" x2="{}" y2="{ground:.4}" stroke="#555" stroke-width="2"/>"##,
        view.width
    );
    if let (Some((c, angle)), Some((a, b))) = (f.ellipse, file.ellipse_axes) {
        let s = view.to_screen(c);
        let _ = writeln!(
            out,
            r##"<ellipse cx="{:.4}" cy="{:.4}" rx="{:.4}" ry="{:.4}" transform="rotate({:.4} {:.4} {:.4})" fill="#f4c27a" stroke="#a0692a"/>"##,
            s[0],
            s[1],
            a * view.scale,
            b * view.scale,
            -angle.to_degrees(),
            s[0],
            s[1]
        );
    }
    for &(i, j) in &file.springs {
        let (p, q) = (view.to_screen(f.positions[i]), view.to_screen(f.positions[j]));
        let _ = writeln!(
            out,
            r##"<line x1="{:.4}" y1="{:.4}" x2="{:.4}" y2="{:.4}" stroke="#3b6ea5" stroke-width="1.2"/>"##,
            p[0],
            p[1],
            q[0],
            q[1]
        );
    }
    for (k, p) in f.positions.iter().enumerate() {
        let s = view.to_screen(*p);
        let _ = writeln!(out, r##"<circle data-node="{k}" cx="{:.4}" cy="{:.4}" r="2.5" fill="#1b2f45"/>"##, s[0], s[1]);
    }
    let _ = writeln!(out, r#"<text x="8" y="16">step {}</text>"#, f.step);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TrajectoryFrame;

    #[test]
    fn viewport_round_trip() {
        let file = TrajectoryFile {
            springs: vec![(0, 1)],
            ellipse_axes: None,
            frames: vec![TrajectoryFrame { step: 0, positions: vec![[-1.0, 0.5], [2.0, 3.0]], ellipse: None }],
        };
        let v = Viewport::fit(&file, 400.0, 300.0);
        for p in &file.frames[0].positions {
            let back = v.to_world(v.to_screen(*p));
            assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-12);
            let s = v.to_screen(*p);
            assert!(s[0] >= 0.0 && s[0] <= 400.0 && s[1] >= 0.0 && s[1] <= 300.0);
        }
    }

    #[test]
    fn header_comments_are_well_formed() {
        let svg = Chart::new("t", "x", "y", ChartKind::Line).with_series("a", vec![(0.0, 1.0), (1.0, 2.0)]).render(&["a--b".into()]);
        assert!(svg.contains("<!-- a- -b -->"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn log_axis_ignores_nonpositive_x() {
        let svg = Chart::new("t", "x", "y", ChartKind::Line).log_x().with_series("a", vec![(0.0, 5.0), (10.0, 1.0), (1000.0, 0.5)]).render(&[]);
        assert!(svg.contains("polyline"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 1.0, 5);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
    }
}
