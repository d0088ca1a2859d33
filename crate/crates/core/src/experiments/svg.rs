//! Minimal line plots with error bars.

use std::fmt::Write;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// `(x, y, error)` points; the error bar is omitted when zero.
    pub points: Vec<(f64, f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = extent(pts().map(|p| p.0));
    let (y0, y1) = extent(pts().flat_map(|p| [p.1 - p.2, p.1 + p.2]));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title));
    let (l, r, t, b) = (PAD, W - PAD, PAD, H - PAD);
    let _ = writeln!(s, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(fx), b + 18.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 14.0, esc(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .enumerate()
            .map(|(k, p)| format!("{}{:.2} {:.2}", if k == 0 { "M" } else { "L" }, sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(s, r#"<path d="{}" stroke="{c}" fill="none" stroke-width="1.5"/>"#, path.join(" "));
        for &(x, y, e) in ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(x), sy(y));
            if e > 0.0 && e.is_finite() {
                let _ = writeln!(
                    s,
                    r#"<path d="M{0:.2} {1:.2} L{0:.2} {2:.2}" stroke="{c}"/>"#,
                    sx(x),
                    sy(y - e),
                    sy(y + e)
                );
            }
        }
        let ly = t + 16.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, r - 150.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, r - 135.0, esc(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
