//! Self-contained SVG rendering of learning curves and heatmaps.

use std::fmt::Write as _;

use super::stats::AggregateRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Median line over a shaded 25th to 75th percentile band.
pub fn curve_svg(rows: &[AggregateRow], title: &str, reference: Option<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let finite = |v: f64| v.is_finite();
    let x_max = rows.iter().map(|r| r.step as f64).fold(1.0, f64::max);
    let mut y_lo = rows.iter().map(|r| r.p25).filter(|v| finite(*v)).fold(0.0, f64::min);
    let mut y_hi = rows.iter().map(|r| r.p75).filter(|v| finite(*v)).fold(f64::NEG_INFINITY, f64::max);
    if let Some(r) = reference.filter(|r| r.is_finite()) {
        y_lo = y_lo.min(r);
        y_hi = y_hi.max(r);
    }
    if !y_hi.is_finite() || y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let px = |step: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * step / x_max;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - y_lo) / (y_hi - y_lo);

    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    let label = r#"font-family="sans-serif" font-size="11""#;
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" {label}>training step</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" {label}>{:.3}</text>"#, MARGIN - 4.0, py(y_lo), y_lo);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" {label}>{:.3}</text>"#, MARGIN - 4.0, py(y_hi) + 4.0, y_hi);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" {label}>{}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 14.0, x_max);

    if !rows.is_empty() {
        let mut band = String::new();
        for r in rows {
            let _ = write!(band, "{:.2},{:.2} ", px(r.step as f64), py(r.p75));
        }
        for r in rows.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(r.step as f64), py(r.p25));
        }
        let _ = writeln!(out, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>"##, band.trim_end());
        let line: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.step as f64), py(r.median))).collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, line.join(" "));
    }
    if let Some(r) = reference.filter(|r| r.is_finite()) {
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            MARGIN,
            WIDTH - MARGIN,
            y = py(r)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One square per grid cell, blue for low and red for high values; missing
/// cells are drawn dark gray.
pub fn heatmap_svg(grid: &[Vec<Option<f64>>], cell: f64) -> String {
    let rows = grid.len();
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let values = grid.iter().flatten().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (cols as f64 * cell, rows as f64 * cell);
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    out.push('\n');
    for (r, row) in grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let fill = match v {
                Some(v) if v.is_finite() => {
                    let t = if hi > lo { (v - lo) / span } else { 0.5 };
                    format!("rgb({},{},{})", (255.0 * t).round(), 40, (255.0 * (1.0 - t)).round())
                }
                _ => "rgb(60,60,60)".to_string(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{fill}"/>"#,
                c as f64 * cell,
                r as f64 * cell
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
