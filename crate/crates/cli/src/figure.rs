//! Hand-rolled static SVG box plot of per-model AUC distributions: one box
//! per model (quartiles and median), whiskers at the 2.5 and 97.5
//! percentiles. Output is deterministic: fixed metadata, fixed-precision
//! coordinates, no timestamps.

use std::fmt::Write;

use prescreen_core::harness::BenchmarkReport;
use prescreen_core::stats::percentile;

const BOX_FILL: &str = "#a6c8e4";
const BOX_STROKE: &str = "#1f4e79";
const GRID_STROKE: &str = "#d9d9d9";
const TEXT_COLOR: &str = "#222222";

struct BoxStats {
    name: String,
    lo: f64,
    q1: f64,
    median: f64,
    q3: f64,
    hi: f64,
}

/// Renders the report as an SVG document string.
pub fn box_plot(report: &BenchmarkReport) -> String {
    let boxes: Vec<BoxStats> = report
        .models
        .iter()
        .map(|m| {
            let mut sorted = m.summary.samples.clone();
            sorted.sort_by(f64::total_cmp);
            BoxStats {
                name: m.kind.to_string(),
                lo: percentile(&sorted, 0.025),
                q1: percentile(&sorted, 0.25),
                median: percentile(&sorted, 0.5),
                q3: percentile(&sorted, 0.75),
                hi: percentile(&sorted, 0.975),
            }
        })
        .collect();

    let slot = 80.0;
    let margin_left = 64.0;
    let margin_right = 16.0;
    let margin_top = 48.0;
    let margin_bottom = 108.0;
    let plot_w = slot * boxes.len().max(1) as f64;
    let plot_h = 300.0;
    let width = margin_left + plot_w + margin_right;
    let height = margin_top + plot_h + margin_bottom;

    // Pad the value range and snap it to a 0.05 grid inside [0, 1].
    let mut lo = boxes.iter().map(|b| b.lo).fold(f64::INFINITY, f64::min);
    let mut hi = boxes.iter().map(|b| b.hi).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let y_lo = ((lo - 0.05) / 0.05).floor() * 0.05;
    let y_hi = ((hi + 0.05) / 0.05).ceil() * 0.05;
    let y_lo = y_lo.max(0.0);
    let y_hi = y_hi.min(1.0).max(y_lo + 0.05);
    let y_of = |v: f64| margin_top + plot_h * (y_hi - v) / (y_hi - y_lo);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    );
    let _ = write!(svg, "  <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "  <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\" fill=\"{TEXT_COLOR}\">Cross-validated AUC by model</text>\n",
        width / 2.0
    );
    let _ = write!(
        svg,
        "  <text x=\"{:.1}\" y=\"40\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"11\" fill=\"{TEXT_COLOR}\">k = {}, repetitions = {}, seed = {}</text>\n",
        width / 2.0,
        report.plan.k,
        report.plan.repetitions,
        report.plan.seed
    );

    // Horizontal grid lines and y-axis tick labels every 0.05.
    let mut tick = y_lo;
    while tick <= y_hi + 1e-9 {
        let y = y_of(tick);
        let _ = write!(
            svg,
            "  <line x1=\"{margin_left:.1}\" y1=\"{y:.2}\" x2=\"{:.1}\" y2=\"{y:.2}\" \
             stroke=\"{GRID_STROKE}\" stroke-width=\"1\"/>\n",
            margin_left + plot_w
        );
        let _ = write!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\" fill=\"{TEXT_COLOR}\">{tick:.2}</text>\n",
            margin_left - 8.0,
            y + 4.0
        );
        tick += 0.05;
    }

    for (i, b) in boxes.iter().enumerate() {
        let cx = margin_left + slot * (i as f64 + 0.5);
        let half_box = 22.0;
        let half_cap = 12.0;
        let (y_lo_w, y_hi_w) = (y_of(b.lo), y_of(b.hi));
        let (y_q1, y_q3, y_med) = (y_of(b.q1), y_of(b.q3), y_of(b.median));
        // Whisker spine and caps.
        let _ = write!(
            svg,
            "  <line x1=\"{cx:.2}\" y1=\"{y_hi_w:.2}\" x2=\"{cx:.2}\" y2=\"{y_lo_w:.2}\" \
             stroke=\"{BOX_STROKE}\" stroke-width=\"1\"/>\n"
        );
        for y in [y_lo_w, y_hi_w] {
            let _ = write!(
                svg,
                "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"{BOX_STROKE}\" stroke-width=\"1\"/>\n",
                cx - half_cap,
                cx + half_cap
            );
        }
        // Interquartile box and median.
        let _ = write!(
            svg,
            "  <rect x=\"{:.2}\" y=\"{y_q3:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{BOX_FILL}\" stroke=\"{BOX_STROKE}\" stroke-width=\"1\"/>\n",
            cx - half_box,
            2.0 * half_box,
            (y_q1 - y_q3).max(0.5)
        );
        let _ = write!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y_med:.2}\" x2=\"{:.2}\" y2=\"{y_med:.2}\" \
             stroke=\"{BOX_STROKE}\" stroke-width=\"2\"/>\n",
            cx - half_box,
            cx + half_box
        );
        // Model label, angled to stay readable.
        let label_y = margin_top + plot_h + 16.0;
        let _ = write!(
            svg,
            "  <text x=\"{cx:.2}\" y=\"{label_y:.2}\" text-anchor=\"end\" \
             font-family=\"sans-serif\" font-size=\"11\" fill=\"{TEXT_COLOR}\" \
             transform=\"rotate(-35 {cx:.2} {label_y:.2})\">{}</text>\n",
            b.name
        );
    }

    // Axes on top of the grid.
    let _ = write!(
        svg,
        "  <line x1=\"{margin_left:.1}\" y1=\"{margin_top:.1}\" x2=\"{margin_left:.1}\" \
         y2=\"{:.1}\" stroke=\"{TEXT_COLOR}\" stroke-width=\"1\"/>\n",
        margin_top + plot_h
    );
    let _ = write!(
        svg,
        "  <line x1=\"{margin_left:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
         stroke=\"{TEXT_COLOR}\" stroke-width=\"1\"/>\n",
        margin_top + plot_h,
        margin_left + plot_w,
        margin_top + plot_h
    );
    svg.push_str("</svg>\n");
    svg
}
