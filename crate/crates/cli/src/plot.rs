//! Minimal SVG line and bar charts.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 1500;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#000000", "#aa3377",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str, x_ticks: bool) {
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in ticks(y.0, y.1, 6) {
        let py = TOP + ph * (1.0 - (t - y.0) / (y.1 - y.0));
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            label(t)
        );
    }
    if x_ticks {
        for t in ticks(x.0, x.1, 8) {
            let px = LEFT + pw * (t - x.0) / (x.1 - x.0);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{}" stroke="#eee"/><text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                label(t)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[(&str, &str, bool)]) {
    for (i, (name, color, dashed)) in names.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let dash = if *dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            x + 22.0,
            x + 28.0,
            y + 4.0,
            escape(name)
        );
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let x0 = all().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x1 = all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) =
        padded(all().map(|p| p.1).fold(f64::INFINITY, f64::min), all().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max));
    let x = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x, (y0, y1), x_label, y_label, true);
    let mut names = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
        let path: Vec<String> = s
            .points
            .iter()
            .step_by(stride)
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(px, py)| {
                format!("{:.1},{:.1}", LEFT + pw * (px - x.0) / (x.1 - x.0), TOP + ph * (1.0 - (py - y0) / (y1 - y0)))
            })
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.3"{dash} points="{}"/>"#,
            path.join(" ")
        );
        names.push((s.name.as_str(), color, s.dashed));
    }
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Stacked bars: one bar per category, one segment per component.
pub fn stacked_bars(title: &str, y_label: &str, categories: &[String], components: &[(String, Vec<f64>)]) -> String {
    let totals: Vec<f64> = (0..categories.len()).map(|c| components.iter().map(|(_, v)| v[c].max(0.0)).sum()).collect();
    let top = totals.iter().copied().fold(0.0, f64::max).max(1e-12) * 1.1;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, (0.0, 1.0), (0.0, top), "", y_label, false);
    let slot = pw / categories.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        let x = LEFT + slot * (c as f64 + 0.2);
        let mut base = 0.0;
        for (i, (_, values)) in components.iter().enumerate() {
            let v = values[c].max(0.0);
            let y_hi = TOP + ph * (1.0 - (base + v) / top);
            let h = ph * v / top;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{y_hi:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
                slot * 0.6,
                PALETTE[i % PALETTE.len()]
            );
            base += v;
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            x + slot * 0.3,
            TOP + ph + 16.0,
            escape(name)
        );
    }
    let names: Vec<(&str, &str, bool)> =
        components.iter().enumerate().map(|(i, (n, _))| (n.as_str(), PALETTE[i % PALETTE.len()], false)).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
