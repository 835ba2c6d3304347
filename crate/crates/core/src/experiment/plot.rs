//! Minimal SVG line plots for sweep results. Plots are derived artifacts:
//! emission never feeds back into the numeric outputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Writes one SVG chart with a polyline per series. With `log_y`, the y axis
/// is log10 (non-positive points are dropped).
pub fn write_line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_y: bool,
) -> Result<()> {
    let map_y = |v: f64| if log_y { v.log10() } else { v };
    let points: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(_, y)| !log_y || *y > 0.0)
        .map(|&(x, y)| (x, map_y(y)))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{tx}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>
"#,
        tx = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        title = escape(title),
    );
    // axes
    let _ = write!(
        svg,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>
<text x="{xc}" y="{xl}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_label}</text>
<text x="18" y="{yc}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {yc})">{y_label}</text>
"#,
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B,
        xc = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        xl = HEIGHT - 12.0,
        yc = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        x_label = escape(x_label),
        y_label = escape(if log_y { "log10 " } else { "" }) + &escape(y_label),
    );
    // min/max tick labels
    for (v, x, y, anchor) in [
        (x_min, px(x_min), HEIGHT - MARGIN_B + 18.0, "middle"),
        (x_max, px(x_max), HEIGHT - MARGIN_B + 18.0, "middle"),
        (y_min, MARGIN_L - 8.0, py(y_min) + 4.0, "end"),
        (y_max, MARGIN_L - 8.0, py(y_max) + 4.0, "end"),
    ] {
        let _ = write!(
            svg,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.4}</text>
"#
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(_, y)| !log_y || *y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(map_y(y))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>
"#,
            pts.join(" ")
        );
        let ly = MARGIN_T + 16.0 * i as f64 + 10.0;
        let _ = write!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{lx2}" y2="{ly}" stroke="{color}" stroke-width="2"/>
<text x="{tx}" y="{ty}" font-family="sans-serif" font-size="12">{label}</text>
"#,
            lx = WIDTH - MARGIN_R + 12.0,
            lx2 = WIDTH - MARGIN_R + 34.0,
            tx = WIDTH - MARGIN_R + 40.0,
            ty = ly + 4.0,
            label = escape(&s.label),
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
