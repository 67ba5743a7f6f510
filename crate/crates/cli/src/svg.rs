//! Deterministic SVG output: heatmaps, line charts and scatter plots.
//!
//! All coordinates are printed with fixed precision so identical input
//! gives identical bytes.

use std::fmt::Write;

use yearsense::{Error, Result, YearGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Palette {
    /// Color at 0.
    pub low: [u8; 3],
    /// Color at 1.
    pub high: [u8; 3],
    pub missing: [u8; 3],
}

impl Palette {
    pub const BLUES: Palette = Palette {
        low: [247, 251, 255],
        high: [8, 48, 107],
        missing: [204, 204, 204],
    };
    pub const GRAY: Palette = Palette {
        low: [255, 255, 255],
        high: [0, 0, 0],
        missing: [255, 200, 200],
    };

    /// Linear interpolation; values are clamped to [0, 1].
    pub fn color(&self, v: Option<f64>) -> String {
        let Some(v) = v.filter(|v| v.is_finite()) else {
            return hex(self.missing);
        };
        let t = v.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
        hex([
            mix(self.low[0], self.high[0]),
            mix(self.low[1], self.high[1]),
            mix(self.low[2], self.high[2]),
        ])
    }
}

impl std::str::FromStr for Palette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blues" => Ok(Palette::BLUES),
            "gray" | "grey" => Ok(Palette::GRAY),
            other => Err(Error::Config(format!("unknown palette {other:?} (blues, gray)"))),
        }
    }
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Block means over `factor x factor` tiles (the last tile in each direction
/// may be smaller). Missing cells are ignored; an all-missing tile is missing.
pub fn downsample(grid: &YearGrid, factor: usize) -> Vec<Vec<Option<f64>>> {
    let n = grid.n();
    let factor = factor.max(1);
    let m = n.div_ceil(factor);
    (0..m)
        .map(|bi| {
            (0..m)
                .map(|bj| {
                    let (mut sum, mut count) = (0.0, 0usize);
                    for r in bi * factor..((bi + 1) * factor).min(n) {
                        for c in bj * factor..((bj + 1) * factor).min(n) {
                            if let Some(v) = grid.at(r, c) {
                                sum += v;
                                count += 1;
                            }
                        }
                    }
                    (count > 0).then(|| sum / count as f64)
                })
                .collect()
        })
        .collect()
}

const CELL_AREA: f64 = 600.0;
const MARGIN: f64 = 60.0;

/// Heatmap of a year grid, row year on the vertical axis. One `<rect>` per
/// downsampled cell.
pub fn render_heatmap(grid: &YearGrid, palette: Palette, factor: usize, title: &str) -> String {
    let tiles = downsample(grid, factor);
    let m = tiles.len().max(1);
    let cell = CELL_AREA / m as f64;
    let size = CELL_AREA + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.0} {size:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        size / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<g id="cells" shape-rendering="crispEdges">"#);
    for (r, row) in tiles.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                MARGIN + c as f64 * cell,
                MARGIN + r as f64 * cell,
                cell,
                cell,
                palette.color(*v)
            );
        }
    }
    s.push_str("</g>\n");
    // about eight ticks per axis
    let range = grid.range();
    let factor = factor.max(1);
    let step = (m / 8).max(1);
    let _ = writeln!(s, r#"<g id="axes">"#);
    for k in (0..m).step_by(step) {
        let year = range.start() + (k * factor) as i32;
        let pos = MARGIN + (k as f64 + 0.5) * cell;
        let _ = writeln!(
            s,
            r#"<text x="{pos:.1}" y="{:.1}" text-anchor="middle">{year}</text>"#,
            MARGIN + CELL_AREA + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{year}</text>"#,
            MARGIN - 6.0,
            pos + 4.0
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
}

impl ChartOptions {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 720.0,
            height: 440.0,
        }
    }
}

const SERIES_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn new(points: impl Iterator<Item = (f64, f64)>, opts: &ChartOptions) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 == 0.0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 == 0.0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let (left, top) = (70.0, 40.0);
        Self {
            x0,
            x1,
            y0,
            y1,
            left,
            top,
            w: opts.width - left - 170.0,
            h: opts.height - top - 60.0,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h
    }

    fn write_axes(&self, s: &mut String, opts: &ChartOptions) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            self.left + self.w / 2.0,
            escape(&opts.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444444"/>"##,
            self.left, self.top, self.w, self.h
        );
        for k in 0..=4 {
            let f = f64::from(k) / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                self.px(xv),
                self.top + self.h + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                self.left - 6.0,
                self.py(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            self.left + self.w / 2.0,
            self.top + self.h + 40.0,
            escape(&opts.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            self.top + self.h / 2.0,
            self.top + self.h / 2.0,
            escape(&opts.y_label)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || (v.fract() == 0.0 && v.abs() < 1e6) {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn header(opts: &ChartOptions) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n",
        w = opts.width,
        h = opts.height
    )
}

/// Line chart with a legend. Non-finite points break the line.
pub fn render_series(series: &[Series], opts: &ChartOptions) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InsufficientData("no series to plot".into()));
    }
    let frame = Frame::new(series.iter().flat_map(|s| s.points.iter().copied()), opts);
    let mut s = header(opts);
    frame.write_axes(&mut s, opts);
    for (k, ser) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, s: &mut String| {
            if !segment.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                    segment.join(" ")
                );
                segment.clear();
            }
        };
        for &(x, y) in &ser.points {
            if x.is_finite() && y.is_finite() {
                segment.push(format!("{:.2},{:.2}", frame.px(x), frame.py(y)));
            } else {
                flush(&mut segment, &mut s);
            }
        }
        flush(&mut segment, &mut s);
        let ly = frame.top + 14.0 + 18.0 * k as f64;
        let lx = frame.left + frame.w + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2.5"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Scatter plot; `labels` (same length as `points`, may be empty strings)
/// are drawn next to each point.
pub fn render_scatter(points: &[(f64, f64)], labels: &[String], opts: &ChartOptions) -> Result<String> {
    if points.is_empty() {
        return Err(Error::InsufficientData("no points to plot".into()));
    }
    let frame = Frame::new(points.iter().copied(), opts);
    let mut s = header(opts);
    frame.write_axes(&mut s, opts);
    for (k, &(x, y)) in points.iter().enumerate() {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let (px, py) = (frame.px(x), frame.py(y));
        let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{}"/>"#, SERIES_COLORS[0]);
        if let Some(l) = labels.get(k).filter(|l| !l.is_empty()) {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px + 4.0, py - 4.0, escape(l));
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
