//! Minimal SVG line and bar charts.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

pub struct LineSeries {
    pub label: String,
    pub color: &'static str,
    pub values: Vec<Option<f64>>,
}

/// Shaded interval drawn under the lines.
pub struct Band {
    pub color: &'static str,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn new<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-9 {
            hi = lo + 1.0;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn y(&self, v: f64) -> f64 {
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        MARGIN_T + plot_h * (1.0 - (v - self.lo) / (self.hi - self.lo))
    }
}

fn y_axis(out: &mut String, scale: &Scale) {
    let x0 = MARGIN_L;
    let _ = writeln!(
        out,
        r##"<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{}" stroke="#444"/>"##,
        HEIGHT - MARGIN_B
    );
    for i in 0..=4 {
        let v = scale.lo + (scale.hi - scale.lo) * i as f64 / 4.0;
        let y = scale.y(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            WIDTH - MARGIN_R,
            x0 - 6.0,
            y + 4.0
        );
    }
}

fn legend(out: &mut String, items: &[(&str, &str)]) {
    let x = WIDTH - MARGIN_R + 15.0;
    for (i, (label, color)) in items.iter().enumerate() {
        let y = MARGIN_T + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="14" height="4" fill="{color}"/><text x="{}" y="{y}">{}</text>"#,
            y - 6.0,
            x + 20.0,
            escape(label)
        );
    }
}

/// Lines over a shared categorical x axis; `None` values break the line.
pub fn line_chart(title: &str, x_labels: &[String], series: &[LineSeries], bands: &[Band]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let all = series
        .iter()
        .flat_map(|s| s.values.iter().flatten())
        .chain(bands.iter().flat_map(|b| b.lower.iter().chain(&b.upper).flatten()));
    let scale = Scale::new(all);
    y_axis(&mut out, &scale);
    let n = x_labels.len().max(2);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let x = |i: usize| MARGIN_L + plot_w * i as f64 / (n - 1) as f64;

    for band in bands {
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for i in 0..x_labels.len() {
            if let (Some(Some(lo)), Some(Some(hi))) = (band.lower.get(i), band.upper.get(i)) {
                upper.push(format!("{:.1},{:.1}", x(i), scale.y(*hi)));
                lower.push(format!("{:.1},{:.1}", x(i), scale.y(*lo)));
            }
        }
        if !upper.is_empty() {
            lower.reverse();
            let _ = writeln!(
                out,
                r#"<polygon points="{} {}" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" "),
                band.color
            );
        }
    }
    for s in series {
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"#,
                    seg.join(" "),
                    s.color
                );
            } else if let Some(p) = seg.first() {
                let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2" fill="{}"/>"#, s.color);
            }
            seg.clear();
        };
        for (i, v) in s.values.iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => segment.push(format!("{:.1},{:.1}", x(i), scale.y(*v))),
                _ => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
    }
    let step = (x_labels.len() / 6).max(1);
    for (i, label) in x_labels.iter().enumerate().step_by(step) {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            x(i),
            HEIGHT - MARGIN_B + 18.0,
            escape(label)
        );
    }
    let items: Vec<(&str, &str)> = series.iter().map(|s| (s.label.as_str(), s.color)).collect();
    legend(&mut out, &items);
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars, one per label, in the given order.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let max = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let left = 180.0;
    let plot_w = WIDTH - left - 80.0;
    let row_h = ((HEIGHT - MARGIN_T - MARGIN_B) / labels.len().max(1) as f64).min(40.0);
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let y = MARGIN_T + row_h * i as f64;
        let w = plot_w * v.abs() / max;
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text><rect x="{left}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="#3465a4"/><text x="{:.1}" y="{:.1}">{v:.4}</text>"##,
            left - 8.0,
            y + row_h * 0.6,
            escape(label),
            y + row_h * 0.15,
            row_h * 0.7,
            left + w + 6.0,
            y + row_h * 0.6
        );
    }
    if labels.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">no non-zero coefficients</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
    }
    out.push_str("</svg>\n");
    out
}

const PALETTE: [&str; 6] = ["#3465a4", "#c4007a", "#4e9a06", "#f57900", "#75507b", "#555753"];

/// Groups along x, one bar per series inside each group. `values[g][s]`.
pub fn grouped_bar_chart(title: &str, groups: &[String], series: &[String], values: &[Vec<Option<f64>>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let scale = Scale::new(values.iter().flatten().flatten().chain(std::iter::once(&0.0)));
    y_axis(&mut out, &scale);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let base = scale.y(0.0);
    for (g, label) in groups.iter().enumerate() {
        let gx = MARGIN_L + group_w * g as f64 + group_w * 0.1;
        for (s, v) in values.get(g).into_iter().flatten().enumerate() {
            if let Some(v) = v {
                let top = scale.y(*v);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.1}" y="{:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"/>"#,
                    gx + bar_w * s as f64,
                    top.min(base),
                    (base - top).abs(),
                    PALETTE[s % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            HEIGHT - MARGIN_B + 18.0,
            escape(label)
        );
    }
    let items: Vec<(&str, &str)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut out, &items);
    out.push_str("</svg>\n");
    out
}
