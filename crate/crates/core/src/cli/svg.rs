//! Minimal SVG line charts and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - PAD / 2.0, PAD / 1.5);
    let _ = write!(
        out,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    let _ = write!(out, r#"<text x="{x0}" y="{}" text-anchor="middle">{:.3}</text>"#, y0 + 16.0, x.0);
    let _ = write!(out, r#"<text x="{x1}" y="{}" text-anchor="middle">{:.3}</text>"#, y0 + 16.0, x.1);
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3e}</text>"#, x0 - 4.0, y0, y.0);
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3e}</text>"#, x0 - 4.0, y1 + 4.0, y.1);
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(xlabel));
    let _ = write!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

/// Line chart of several series sharing the axes. With `log_y`, values are
/// plotted as `log10(max(v, 1e-300))`.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], log_y: bool) -> String {
    let tf = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let xb = bounds(series.iter().flat_map(|s| s.x.iter().copied()));
    let yb = bounds(series.iter().flat_map(|s| s.y.iter().map(|&v| tf(v))));
    let mut out = String::new();
    header(&mut out, title);
    let ylabel = if log_y { format!("log10 {ylabel}") } else { ylabel.to_string() };
    axes(&mut out, xb, yb, xlabel, &ylabel);
    let sx = |v: f64| PAD + (v - xb.0) / (xb.1 - xb.0) * (W - 1.5 * PAD);
    let sy = |v: f64| (H - PAD) - (v - yb.0) / (yb.1 - yb.0) * (H - PAD - PAD / 1.5);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (&x, &y) in s.x.iter().zip(s.y) {
            let yv = tf(y);
            if !yv.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(yv));
            pen_down = true;
        }
        let _ = write!(out, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.trim_end());
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - 1.5 * PAD - 60.0,
            PAD + 14.0 * k as f64,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of `values[row * ncols + col]`; row 0 is drawn at the bottom.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64), ncols: usize, values: &[f64]) -> String {
    let nrows = values.len().checked_div(ncols).unwrap_or(0);
    let vb = bounds(values.iter().copied());
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x, y, xlabel, ylabel);
    let cw = (W - 1.5 * PAD) / ncols.max(1) as f64;
    let ch = (H - PAD - PAD / 1.5) / nrows.max(1) as f64;
    for r in 0..nrows {
        for c in 0..ncols {
            let v = values[r * ncols + c];
            let t = if v.is_finite() { ((v - vb.0) / (vb.1 - vb.0)).clamp(0.0, 1.0) } else { 0.0 };
            let (red, green, blue) = ramp(t);
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({red},{green},{blue})"/>"#,
                PAD + c as f64 * cw,
                H - PAD - (r + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">range [{:.3e}, {:.3e}]</text>"#, W - 8.0, PAD / 1.5 - 2.0, vb.0, vb.1);
    out.push_str("</svg>\n");
    out
}

fn ramp(t: f64) -> (u8, u8, u8) {
    // Dark blue through yellow.
    let r = (255.0 * t.powf(0.8)) as u8;
    let g = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t).powf(1.5) * 0.6 + 40.0 * (1.0 - t)) as u8;
    (r, g, b)
}
