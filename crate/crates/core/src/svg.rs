//! Minimal self-contained SVG charts for the report stage.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if a == b { (a - 0.5, b + 0.5) } else { (a, b) };
        let (x0, x1) = widen(x);
        let (y0, y1) = widen(y);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (bx, by) = (f.px(f.x0), f.py(f.y0));
    let (tx, ty) = (f.px(f.x1), f.py(f.y1));
    let _ = writeln!(
        s,
        r##"<path d="M{bx:.1},{ty:.1}V{by:.1}H{tx:.1}" fill="none" stroke="#333"/>"##
    );
    for k in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let (xp, yp) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{xp:.1}" y1="{by:.1}" x2="{xp:.1}" y2="{:.1}" stroke="#333"/><text x="{xp:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            by + 4.0,
            by + 16.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{yp:.1}" x2="{bx:.1}" y2="{yp:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            bx - 4.0,
            bx - 6.0,
            yp + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (bx + tx) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        (by + ty) / 2.0,
        escape(ylabel)
    );
    s
}

fn legend(s: &mut String, labels: &[&str]) {
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + 6.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{c}"/><text x="{}" y="{}">{}</text>"#,
            y - 9.0,
            x + 14.0,
            y,
            escape(label)
        );
    }
}

/// Line chart; optional horizontal reference lines are drawn dashed.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], markers: &[(f64, &str)]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for &(x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y), yr.1.max(y));
    }
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    let f = Frame::new(xr, yr);
    let mut s = open(title, xlabel, ylabel, &f);
    for (i, ser) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, &(x, y)) in ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .enumerate()
        {
            let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { "L" }, f.px(x), f.py(y));
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{c}" stroke-width="1.5"/>"#);
        if ser.points.len() <= 60 {
            for &(x, y) in &ser.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#,
                    f.px(x),
                    f.py(y)
                );
            }
        }
    }
    for &(x, label) in markers {
        let xp = f.px(x);
        let _ = writeln!(
            s,
            r##"<line x1="{xp:.1}" y1="{TOP}" x2="{xp:.1}" y2="{}" stroke="#555" stroke-dasharray="4 3"/><text x="{:.1}" y="{}">{}</text>"##,
            H - BOTTOM,
            xp + 4.0,
            TOP + 12.0,
            escape(label)
        );
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// Overlaid step histograms sharing `edges`; the first group is filled.
pub fn histogram_overlay(title: &str, xlabel: &str, edges: &[f64], groups: &[(&str, &[usize])]) -> String {
    // Heights are densities so groups of different size are comparable.
    let dens: Vec<Vec<f64>> = groups
        .iter()
        .map(|(_, h)| {
            let total = h.iter().sum::<usize>().max(1) as f64;
            h.iter()
                .zip(edges.windows(2))
                .map(|(&c, e)| c as f64 / (total * (e[1] - e[0]).max(f64::MIN_POSITIVE)))
                .collect()
        })
        .collect();
    let ymax = dens.iter().flatten().copied().fold(0.0, f64::max);
    let f = Frame::new(
        (edges[0], *edges.last().unwrap_or(&1.0)),
        (0.0, if ymax > 0.0 { ymax * 1.05 } else { 1.0 }),
    );
    let mut s = open(title, xlabel, "density", &f);
    for (i, d) in dens.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        if i == 0 {
            for (k, &h) in d.iter().enumerate() {
                let (x0, x1) = (f.px(edges[k]), f.px(edges[k + 1]));
                let y = f.py(h);
                let _ = writeln!(
                    s,
                    r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.35" stroke="{c}"/>"#,
                    (x1 - x0).max(0.0),
                    (f.py(0.0) - y).max(0.0)
                );
            }
        } else {
            let mut p = format!("M{:.2},{:.2}", f.px(edges[0]), f.py(0.0));
            for (k, &h) in d.iter().enumerate() {
                let _ = write!(p, "V{:.2}H{:.2}", f.py(h), f.px(edges[k + 1]));
            }
            let _ = write!(p, "V{:.2}", f.py(0.0));
            let _ = writeln!(s, r#"<path d="{p}" fill="none" stroke="{c}" stroke-width="1.5"/>"#);
        }
    }
    let labels: Vec<&str> = groups.iter().map(|(l, _)| *l).collect();
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// Five-number summary used for boxplots (quartiles by linear interpolation,
/// whiskers at the extreme values).
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

pub fn boxplot(title: &str, ylabel: &str, groups: &[(&str, &[f64])]) -> String {
    let stats: Vec<Option<[f64; 5]>> = groups.iter().map(|(_, v)| five_numbers(v)).collect();
    let lo = stats.iter().flatten().map(|s| s[0]).fold(f64::INFINITY, f64::min);
    let hi = stats.iter().flatten().map(|s| s[4]).fold(f64::NEG_INFINITY, f64::max);
    let yr = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let k = groups.len().max(1) as f64;
    let f = Frame::new((0.5, k + 0.5), yr);
    let mut s = open(title, "model", ylabel, &f);
    let half = 0.25 * (f.px(1.0) - f.px(0.0));
    for (i, st) in stats.iter().enumerate() {
        let xc = f.px(i as f64 + 1.0);
        let c = PALETTE[i % PALETTE.len()];
        if let Some([mn, q1, md, q3, mx]) = st {
            let _ = writeln!(
                s,
                r#"<line x1="{xc:.1}" y1="{:.2}" x2="{xc:.1}" y2="{:.2}" stroke="{c}"/>"#,
                f.py(*mn),
                f.py(*mx)
            );
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.2}" width="{:.1}" height="{:.2}" fill="{c}" fill-opacity="0.3" stroke="{c}"/>"#,
                xc - half,
                f.py(*q3),
                2.0 * half,
                (f.py(*q1) - f.py(*q3)).max(0.0)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.2}" x2="{:.1}" y2="{:.2}" stroke="{c}" stroke-width="2"/>"#,
                xc - half,
                f.py(*md),
                xc + half,
                f.py(*md)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{xc:.1}" y="{}" text-anchor="middle">{}</text>"#,
            TOP - 4.0,
            escape(groups[i].0)
        );
    }
    s.push_str("</svg>\n");
    s
}
