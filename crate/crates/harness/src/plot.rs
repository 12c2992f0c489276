//! Static SVG line plots of EMA reward against wall-clock time.

use std::fmt::Write;

use crate::runner::Row;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const MAX_POINTS: usize = 1500;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

/// A curve with an optional symmetric error band.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// (x, y, half-width of the band)
    pub points: Vec<(f64, f64, f64)>,
}

impl Series {
    pub fn from_rows(label: &str, rows: &[Row]) -> Self {
        Series {
            label: label.to_owned(),
            points: rows.iter().map(|r| (r.wallclock_s, r.ema_reward, 0.0)).collect(),
        }
    }

    fn thinned(&self) -> Vec<(f64, f64, f64)> {
        let n = self.points.len();
        if n <= MAX_POINTS {
            return self.points.clone();
        }
        let stride = n.div_ceil(MAX_POINTS);
        let mut out: Vec<_> = self.points.iter().step_by(stride).copied().collect();
        if !(n - 1).is_multiple_of(stride) {
            out.push(self.points[n - 1]);
        }
        out
    }
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let e = (span / target as f64).log10().floor() as i32;
    let scale = |v: f64| if e < 0 { v / 10f64.powi(-e) } else { v * 10f64.powi(e) };
    let m = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .find(|&m| span / scale(m) <= target as f64)
        .unwrap_or(10.0);
    let first = (lo / scale(m)).ceil() as i64;
    let last = (hi / scale(m) + 1e-9).floor() as i64;
    (first..=last).map(|k| scale(k as f64 * m)).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render the series as a self-contained SVG document.
pub fn render(title: &str, series: &[Series]) -> String {
    let thinned: Vec<Vec<(f64, f64, f64)>> = series.iter().map(Series::thinned).collect();
    let all = thinned.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, e) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    x0 = x0.min(0.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    y1 = y1.max(y0 + 1e-3);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for t in nice_ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#e5e5e5"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"##,
            TOP + ph,
            TOP + ph + 18.0
        );
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e5e5e5"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            (t * 1e6).round() / 1e6
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">wall-clock time (s)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">EMA reward</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (series, pts)) in series.iter().zip(&thinned).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if pts.iter().any(|p| p.2 > 0.0) {
            let mut d = String::new();
            for (j, &(x, y, e)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, sx(x), sy(y + e));
            }
            for &(x, y, e) in pts.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", sx(x), sy(y - e));
            }
            let _ = writeln!(s, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, d);
        }
        if !pts.is_empty() {
            let line: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
        let ly = TOP + 16.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
