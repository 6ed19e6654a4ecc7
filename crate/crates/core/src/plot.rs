//! Self-contained SVG renderings and CSV series for fraction histograms and
//! fraction-vs-ambiguity scatter plots. No external assets, no fonts beyond
//! generic families, byte-deterministic output.

use std::fmt::Write as _;

use crate::stats::{FractionGroupSummary, FractionSummary};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 56.0;

/// A rendered artifact ready to be written next to the report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFile {
    pub name: String,
    pub contents: String,
}

/// Scatter input: one point per model.
#[derive(Debug, Clone)]
pub struct ScatterSeries {
    /// Grouping key, e.g. `subject_verb`.
    pub key: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn sanitize(key: &str) -> String {
    key.replace("->", "_to_")
        .replace([':', ' ', '/', '(', ')', ';'], "_")
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" xmlns="http://www.w3.org/2000/svg">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        title
    );
}

fn svg_axes(out: &mut String, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y1 = MARGIN_TOP;
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        x_label
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        y_label
    );
}

fn plot_x(frac: f64) -> f64 {
    MARGIN_LEFT + frac * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn plot_y(frac: f64) -> f64 {
    (HEIGHT - MARGIN_BOTTOM) - frac * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

/// Histogram of one fraction group. `max_count` fixes the y scale so that
/// several histograms emitted together share axes.
pub fn histogram_svg(group: &FractionGroupSummary, max_count: usize) -> String {
    let mut out = String::new();
    svg_open(&mut out, &format!("Causal fractions: {}", group.key));
    svg_axes(&mut out, "causal fraction", "models");
    let top = max_count.max(1) as f64;
    let bins = group.counts.len();
    for (k, &count) in group.counts.iter().enumerate() {
        let left = group.bin_edges[k];
        let right = group.bin_edges[k + 1];
        let x = plot_x(left);
        let w = plot_x(right) - x;
        let y = plot_y(count as f64 / top);
        let h = plot_y(0.0) - y;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="steelblue" stroke="white" stroke-width="0.5"><title>[{}, {}{}: {}</title></rect>"#,
            fmt(x),
            fmt(y),
            fmt(w),
            fmt(h),
            fmt(left),
            fmt(right),
            if k + 1 == bins { "]" } else { ")" },
            count
        );
    }
    // x ticks at 0, 0.25, 0.5, 0.75, 1 and y ticks at 0 and the max.
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let x = plot_x(v);
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            plot_y(0.0),
            plot_y(0.0) + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            plot_y(0.0) + 16.0,
            fmt(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
        MARGIN_LEFT - 6.0,
        plot_y(1.0) + 4.0,
        max_count.max(1)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">0</text>"#,
        MARGIN_LEFT - 6.0,
        plot_y(0.0) + 4.0
    );
    out.push_str("</svg>\n");
    out
}

/// Scatter of fractions against an ambiguity count, with light horizontal
/// jitter replaced by deterministic stacking: points sharing a coordinate
/// are drawn at the same spot with a slightly larger radius.
pub fn scatter_svg(series: &ScatterSeries) -> String {
    let mut out = String::new();
    svg_open(
        &mut out,
        &format!("{} vs {}", series.y_label, series.x_label),
    );
    svg_axes(&mut out, &series.x_label, &series.y_label);
    let x_max = series
        .points
        .iter()
        .map(|p| p.0)
        .fold(1.0f64, f64::max);
    let mut multiplicity: std::collections::BTreeMap<(i64, i64), usize> =
        std::collections::BTreeMap::new();
    for &(x, y) in &series.points {
        let key = ((x * 1e6) as i64, (y * 1e6) as i64);
        *multiplicity.entry(key).or_default() += 1;
    }
    for (&(xk, yk), &count) in &multiplicity {
        let x = plot_x((xk as f64 / 1e6) / x_max);
        let y = plot_y((yk as f64 / 1e6).clamp(0.0, 1.0));
        let radius = 3.0 + (count as f64).log2().max(0.0);
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="{}" fill="darkorange" fill-opacity="0.7"><title>{} model(s)</title></circle>"#,
            fmt(x),
            fmt(y),
            fmt(radius),
            count
        );
    }
    for k in 0..=x_max.round() as i64 {
        let x = plot_x(k as f64 / x_max);
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{k}</text>"#,
            plot_y(0.0) + 16.0
        );
    }
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            plot_y(v) + 4.0,
            fmt(v)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn histogram_csv(group: &FractionGroupSummary) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (k, &count) in group.counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            group.bin_edges[k], group.bin_edges[k + 1], count
        );
    }
    out
}

pub fn scatter_csv(series: &ScatterSeries) -> String {
    let mut out = format!("{},{}\n", series.x_label, series.y_label);
    let mut points = series.points.clone();
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// Renders every histogram (shared y scale) and scatter series into named
/// files: a CSV and an SVG per series.
pub fn emit_plots(summary: &FractionSummary, scatters: &[ScatterSeries]) -> Vec<PlotFile> {
    let mut files = Vec::new();
    let max_count = summary
        .groups
        .iter()
        .flat_map(|g| g.counts.iter())
        .copied()
        .max()
        .unwrap_or(0);
    for group in &summary.groups {
        let stem = format!("histogram_{}", sanitize(&group.key));
        files.push(PlotFile {
            name: format!("{stem}.csv"),
            contents: histogram_csv(group),
        });
        files.push(PlotFile {
            name: format!("{stem}.svg"),
            contents: histogram_svg(group, max_count),
        });
    }
    for series in scatters {
        let stem = format!("scatter_{}_{}", sanitize(&series.key), sanitize(&series.x_label));
        files.push(PlotFile {
            name: format!("{stem}.csv"),
            contents: scatter_csv(series),
        });
        files.push(PlotFile {
            name: format!("{stem}.svg"),
            contents: scatter_svg(series),
        });
    }
    files
}
