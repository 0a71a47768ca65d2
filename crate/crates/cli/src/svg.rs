//! Minimal deterministic SVG rendering: line charts with axes and a legend,
//! and labeled heatmaps. No plotting dependency; identical input produces
//! identical bytes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 6] = [
    "#1f6fb2", "#d1495b", "#2e8b57", "#b8860b", "#6a4fa3", "#444444",
];

fn fmt(v: f64) -> String {
    // Fixed short decimal keeps files small and byte-stable.
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart over the given series with shared axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(y);
        }
    }
    let (x_min, x_max) = bounds(&xs, 0.0, 1.0);
    let (y_min, y_max) = bounds(&ys, 0.0, 1.0);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    push_header(&mut svg, title);
    // Axes.
    let _ = write!(
        svg,
        "<line x1='{}' y1='{}' x2='{}' y2='{}' stroke='#222' stroke-width='1'/>\
         <line x1='{}' y1='{}' x2='{}' y2='{}' stroke='#222' stroke-width='1'/>",
        fmt(MARGIN_L),
        fmt(MARGIN_T + plot_h),
        fmt(MARGIN_L + plot_w),
        fmt(MARGIN_T + plot_h),
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(MARGIN_T + plot_h),
    );
    // Ticks.
    for i in 0..=5 {
        let fx = x_min + (x_max - x_min) * i as f64 / 5.0;
        let px = sx(fx);
        let _ = write!(
            svg,
            "<line x1='{0}' y1='{1}' x2='{0}' y2='{2}' stroke='#222' stroke-width='1'/>\
             <text x='{0}' y='{3}' font-size='11' text-anchor='middle' fill='#222'>{4}</text>",
            fmt(px),
            fmt(MARGIN_T + plot_h),
            fmt(MARGIN_T + plot_h + 5.0),
            fmt(MARGIN_T + plot_h + 20.0),
            fmt(fx)
        );
        let fy = y_min + (y_max - y_min) * i as f64 / 5.0;
        let py = sy(fy);
        let _ = write!(
            svg,
            "<line x1='{0}' y1='{2}' x2='{1}' y2='{2}' stroke='#222' stroke-width='1'/>\
             <text x='{3}' y='{4}' font-size='11' text-anchor='end' fill='#222'>{5}</text>",
            fmt(MARGIN_L - 5.0),
            fmt(MARGIN_L),
            fmt(py),
            fmt(MARGIN_L - 8.0),
            fmt(py + 4.0),
            fmt(fy)
        );
    }
    // Axis labels.
    let _ = write!(
        svg,
        "<text x='{}' y='{}' font-size='12' text-anchor='middle' fill='#222'>{}</text>\
         <text x='16' y='{}' font-size='12' text-anchor='middle' fill='#222' transform='rotate(-90 16 {})'>{}</text>",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(HEIGHT - 12.0),
        escape(x_label),
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0),
        escape(y_label),
    );
    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in &s.points {
            let _ = write!(path, "{},{} ", fmt(sx(x)), fmt(sy(y)));
        }
        let _ = write!(
            svg,
            "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.5'/>",
            path.trim_end()
        );
        // Legend entry.
        let ly = MARGIN_T + 14.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1='{0}' y1='{1}' x2='{2}' y2='{1}' stroke='{color}' stroke-width='2'/>\
             <text x='{3}' y='{4}' font-size='11' fill='#222'>{5}</text>",
            fmt(MARGIN_L + plot_w - 120.0),
            fmt(ly),
            fmt(MARGIN_L + plot_w - 100.0),
            fmt(MARGIN_L + plot_w - 94.0),
            fmt(ly + 4.0),
            escape(s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap with row labels on the left (sources) and column labels on top
/// (targets); values in [0,1] map from dark blue (0) to light yellow (1).
pub fn heatmap(title: &str, row_labels: &[String], col_labels: &[String], values: &[Vec<f64>]) -> String {
    let rows = row_labels.len();
    let cols = col_labels.len();
    let label_w = 140.0;
    let label_h = 90.0;
    let cell = 48.0;
    let w = label_w + cell * cols as f64 + 24.0;
    let h = label_h + cell * rows as f64 + 24.0;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns='http://www.w3.org/2000/svg' width='{}' height='{}' viewBox='0 0 {} {}'>\
         <rect width='100%' height='100%' fill='white'/>\
         <text x='{}' y='20' font-size='14' text-anchor='middle' fill='#222'>{}</text>",
        fmt(w),
        fmt(h),
        fmt(w),
        fmt(h),
        fmt(w / 2.0),
        escape(title)
    );
    for (j, label) in col_labels.iter().enumerate() {
        let x = label_w + cell * (j as f64 + 0.5);
        let _ = write!(
            svg,
            "<text x='{0}' y='{1}' font-size='10' text-anchor='start' fill='#222' transform='rotate(-45 {0} {1})'>{2}</text>",
            fmt(x),
            fmt(label_h - 8.0),
            escape(label)
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let y = label_h + cell * (i as f64 + 0.5);
        let _ = write!(
            svg,
            "<text x='{}' y='{}' font-size='10' text-anchor='end' fill='#222'>{}</text>",
            fmt(label_w - 6.0),
            fmt(y + 3.0),
            escape(label)
        );
        for (j, &v) in values[i].iter().enumerate() {
            let x = label_w + cell * j as f64;
            let _ = write!(
                svg,
                "<rect x='{}' y='{}' width='{}' height='{}' fill='{}' stroke='#fff'/>\
                 <text x='{}' y='{}' font-size='11' text-anchor='middle' fill='{}'>{}</text>",
                fmt(x),
                fmt(label_h + cell * i as f64),
                fmt(cell),
                fmt(cell),
                color_scale(v),
                fmt(x + cell / 2.0),
                fmt(label_h + cell * i as f64 + cell / 2.0 + 4.0),
                if v < 0.5 { "#eee" } else { "#222" },
                fmt(v)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64], default_min: f64, default_max: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (default_min, default_max);
    }
    if (max - min).abs() < 1e-12 {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    }
}

fn color_scale(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    // Dark blue to light yellow.
    let r = (40.0 + 215.0 * v).round() as u8;
    let g = (50.0 + 185.0 * v).round() as u8;
    let b = (120.0 - 40.0 * v).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn push_header(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        "<svg xmlns='http://www.w3.org/2000/svg' width='{w}' height='{h}' viewBox='0 0 {w} {h}'>\
         <rect width='100%' height='100%' fill='white'/>\
         <text x='{cx}' y='22' font-size='14' text-anchor='middle' fill='#222'>{t}</text>",
        w = fmt(WIDTH),
        h = fmt(HEIGHT),
        cx = fmt(WIDTH / 2.0),
        t = escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
