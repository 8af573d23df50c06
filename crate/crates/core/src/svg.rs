//! Minimal static SVG line plots with optional logarithmic axes.
//!
//! Output is a pure function of the input, formatted with fixed precision,
//! so reruns produce identical files. Points flagged by the caller (vacuous
//! bounds) and points that cannot be placed on a log axis are drawn as open
//! red markers pinned to the bottom edge of the plot area.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f",
];
const FLAG_COLOR: &str = "#d62728";

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Parallel to `points`; `true` marks a point to draw as flagged.
    pub flagged: Vec<bool>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        let flagged = vec![false; points.len()];
        Self {
            name: name.into(),
            points,
            flagged,
        }
    }

    pub fn with_flags(mut self, flagged: Vec<bool>) -> Self {
        assert_eq!(flagged.len(), self.points.len(), "one flag per point");
        self.flagged = flagged;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { log, lo, hi }
    }

    /// Position in `[0, 1]`, or `None` when the value has no place on the axis.
    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo as i64, self.hi as i64);
            let step = ((b - a) / 8).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}")))
                .collect()
        } else {
            (0..=5)
                .map(|k| {
                    let f = k as f64 / 5.0;
                    (f, format!("{:.3}", self.lo + f * (self.hi - self.lo)))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render(plot: &Plot) -> String {
    let pts = || plot.series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::fit(pts().map(|p| p.0), plot.log_x);
    let ya = Axis::fit(
        plot.series.iter().flat_map(|s| {
            s.points
                .iter()
                .zip(&s.flagged)
                .filter(|(_, f)| !**f)
                .map(|(p, _)| p.1)
        }),
        plot.log_y,
    );
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |u: f64| LEFT + u * pw;
    let py = |u: f64| TOP + (1.0 - u) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (u, label) in xa.ticks() {
        let x = px(u);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            TOP + ph + 18.0
        );
    }
    for (u, label) in ya.ticks() {
        let y = py(u);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );

    let mut any_flagged = false;
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = Vec::new();
        let mut markers = String::new();
        for (&(x, y), &flag) in s.points.iter().zip(&s.flagged) {
            let Some(ux) = xa.unit(x) else { continue };
            match ya.unit(y).filter(|_| !flag) {
                Some(uy) => {
                    let (cx, cy) = (px(ux), py(uy));
                    path.push(format!("{cx:.2},{cy:.2}"));
                    let _ = writeln!(
                        markers,
                        r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3.5" fill="{color}"/>"#
                    );
                }
                None => {
                    any_flagged = true;
                    let _ = writeln!(
                        markers,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="{FLAG_COLOR}" stroke-width="1.5" stroke-dasharray="2,2"><title>{}: vacuous at x={x}</title></circle>"#,
                        px(ux),
                        TOP + ph,
                        escape(&s.name)
                    );
                }
            }
        }
        if path.len() > 1 {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                path.join(" ")
            );
        }
        out.push_str(&markers);
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2.5"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    if any_flagged {
        let ly = TOP + 14.0 + 18.0 * plot.series.len() as f64;
        let lx = LEFT + pw + 21.0;
        let _ = writeln!(
            out,
            r#"<circle cx="{lx:.2}" cy="{ly:.2}" r="5" fill="none" stroke="{FLAG_COLOR}" stroke-width="1.5" stroke-dasharray="2,2"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">vacuous / off-axis</text>"#,
            lx + 15.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write(path: &std::path::Path, plot: &Plot) -> std::io::Result<()> {
    std::fs::write(path, render(plot))
}
