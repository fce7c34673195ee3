//! Deterministic SVG line plots: fixed viewBox, two-decimal coordinates.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
    /// Horizontal reference line at y = 0.
    pub zero_line: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Rounds to two decimals and removes the sign of zero.
fn fmt2(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

impl Plot {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let px = LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
        let py = HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);
        (px, py)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
            WIDTH, HEIGHT, WIDTH, HEIGHT
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, fmt2(WIDTH / 2.0), escape(&self.title));
        let (ax0, ay0) = self.map(self.x_range.0, self.y_range.0);
        let (ax1, ay1) = self.map(self.x_range.1, self.y_range.1);
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            fmt2(ax0),
            fmt2(ay1),
            fmt2(ax1 - ax0),
            fmt2(ay0 - ay1)
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x_range.0 + t * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + t * (self.y_range.1 - self.y_range.0);
            let (px, _) = self.map(xv, self.y_range.0);
            let (_, py) = self.map(self.x_range.0, yv);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt2(px), fmt2(ay0 + 16.0), fmt2(xv));
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt2(ax0 - 6.0), fmt2(py + 4.0), fmt2(yv));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt2((ax0 + ax1) / 2.0), fmt2(HEIGHT - 12.0), escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            fmt2((ay0 + ay1) / 2.0),
            fmt2((ay0 + ay1) / 2.0),
            escape(&self.y_label)
        );
        if self.zero_line && self.y_range.0 < 0.0 && self.y_range.1 > 0.0 {
            let (_, pz) = self.map(0.0, 0.0);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888888" stroke-dasharray="4 4"/>"##,
                fmt2(ax0),
                fmt2(pz),
                fmt2(ax1),
                fmt2(pz)
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = self.map(x, y);
                    format!("{},{}", fmt2(px), fmt2(py))
                })
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            let ly = TOP + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1.5"/>"#,
                fmt2(ax1 - 150.0),
                fmt2(ly - 4.0),
                fmt2(ax1 - 130.0),
                fmt2(ly - 4.0)
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, fmt2(ax1 - 124.0), fmt2(ly), escape(&series.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Range padded by 5% on both sides, or ±0.5 around a constant.
pub fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}
