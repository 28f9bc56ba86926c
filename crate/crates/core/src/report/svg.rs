// Hand-written SVG 1.1. Coordinates are printed with two decimals so output
// bytes depend only on the input values.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::index::LineIndexReport;
use crate::signal::{self, Axis, UniformSeries};

const WIDTH: f64 = 960.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 20.0;
const PANEL_H: f64 = 96.0;
const PANEL_GAP: f64 = 18.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 44.0;
const PLOT_W: f64 = WIDTH - LEFT - RIGHT;

const COLORS: [&str; 3] = ["#1f77b4", "#2ca02c", "#9467bd"];
const PULSE_COLOR: &str = "#d62728";
const PREDICTED_COLOR: &str = "#ff7f0e";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAxis {
    pub start_t: f64,
    pub rate_hz: f64,
}

impl TimeAxis {
    pub fn of(series: &UniformSeries) -> Self {
        Self {
            start_t: series.start_t(),
            rate_hz: series.rate_hz(),
        }
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start_t + k as f64 / self.rate_hz
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Doc {
    body: String,
    height: f64,
}

impl Doc {
    fn new(height: f64, title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n\
             <rect x=\"0\" y=\"0\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>\n\
             <text x=\"{:.2}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        );
        Self { body, height }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        debug_assert!(self.height > 0.0);
        self.body
    }
}

/// Vertical value range for a panel. Degenerate ranges are widened so a
/// flat signal draws as a centred line.
fn value_range(series: &[&[f64]]) -> (f64, f64) {
    let (lo, hi) = series
        .iter()
        .flat_map(|s| s.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Indices to draw: every sample for short series, otherwise the min and
/// max of each pixel-wide bucket in index order.
fn decimate(values: &[f64]) -> Vec<usize> {
    let buckets = PLOT_W as usize;
    if values.len() <= 2 * buckets {
        return (0..values.len()).collect();
    }
    let mut out = Vec::with_capacity(2 * buckets);
    for b in 0..buckets {
        let lo = b * values.len() / buckets;
        let hi = ((b + 1) * values.len() / buckets).max(lo + 1);
        let slice = &values[lo..hi];
        let (mut imin, mut imax) = (0, 0);
        for (i, v) in slice.iter().enumerate() {
            if *v < slice[imin] {
                imin = i;
            }
            if *v > slice[imax] {
                imax = i;
            }
        }
        let (a, b) = if imin <= imax { (imin, imax) } else { (imax, imin) };
        out.push(lo + a);
        if b != a {
            out.push(lo + b);
        }
    }
    out
}

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
    n: usize,
}

impl Panel {
    fn x(&self, k: usize) -> f64 {
        if self.n <= 1 {
            LEFT
        } else {
            LEFT + PLOT_W * k as f64 / (self.n - 1) as f64
        }
    }

    fn y(&self, v: f64) -> f64 {
        self.top + PANEL_H * (self.hi - v) / (self.hi - self.lo)
    }
}

fn panel_top(i: usize) -> f64 {
    TOP + i as f64 * (PANEL_H + PANEL_GAP)
}

fn figure_height(panels: usize) -> f64 {
    TOP + panels as f64 * (PANEL_H + PANEL_GAP) - PANEL_GAP + BOTTOM
}

fn open_panel(doc: &mut Doc, index: usize, label: &str, lo: f64, hi: f64, n: usize) -> Panel {
    let p = Panel {
        top: panel_top(index),
        lo,
        hi,
        n,
    };
    let _ = write!(
        doc.body,
        "<g class=\"panel\">\n\
         <rect x=\"{LEFT:.2}\" y=\"{:.2}\" width=\"{PLOT_W:.2}\" height=\"{PANEL_H:.2}\" fill=\"none\" stroke=\"#888888\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#666666\">{:.3}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#666666\">{:.3}</text>\n",
        p.top,
        LEFT - 8.0,
        p.top + PANEL_H / 2.0 + 4.0,
        escape(label),
        LEFT - 4.0,
        p.top + 10.0,
        hi,
        LEFT - 4.0,
        p.top + PANEL_H,
        lo,
    );
    p
}

fn close_panel(doc: &mut Doc) {
    doc.body.push_str("</g>\n");
}

fn polyline(doc: &mut Doc, panel: &Panel, values: &[f64], color: &str) {
    let _ = write!(doc.body, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" points=\"");
    for (i, k) in decimate(values).into_iter().enumerate() {
        if i > 0 {
            doc.body.push(' ');
        }
        let _ = write!(doc.body, "{:.2},{:.2}", panel.x(k), panel.y(values[k]));
    }
    doc.body.push_str("\"/>\n");
}

fn horizontal(doc: &mut Doc, panel: &Panel, v: f64, color: &str) {
    let y = panel.y(v);
    let _ = writeln!(
        doc.body,
        "<line x1=\"{LEFT:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-dasharray=\"4,3\"/>",
        LEFT + PLOT_W
    );
}

fn time_ticks(doc: &mut Doc, axis: TimeAxis, n: usize, bottom_panel: usize) {
    let y = panel_top(bottom_panel) + PANEL_H;
    let panel = Panel {
        top: 0.0,
        lo: 0.0,
        hi: 1.0,
        n,
    };
    let ticks = 6.min(n.max(1));
    for i in 0..ticks {
        let k = if ticks == 1 { 0 } else { i * (n - 1) / (ticks - 1) };
        let x = panel.x(k);
        let _ = writeln!(
            doc.body,
            "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#888888\"/>\n<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.2}</text>",
            y + 5.0,
            y + 18.0,
            axis.time_at(k)
        );
    }
    let _ = writeln!(
        doc.body,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">time (s)</text>",
        LEFT + PLOT_W / 2.0,
        y + 34.0
    );
}

fn pulse_values(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|l| f64::from(*l)).collect()
}

/// Three acceleration channels, three jerk channels and the discomfort
/// pulse train on a shared time axis.
pub fn render_trip_figure(
    accel: &UniformSeries,
    jerk: &UniformSeries,
    labels: &[u8],
    title: &str,
) -> Result<String> {
    let n = accel.len();
    for other in [jerk.len(), labels.len()] {
        if other != n {
            return Err(Error::LengthMismatch { left: n, right: other });
        }
    }
    let mut doc = Doc::new(figure_height(7), title);
    let mut index = 0;
    for (series, unit) in [(accel, "m/s²"), (jerk, "m/s³")] {
        let quantity = if index == 0 { "a" } else { "j" };
        for axis in Axis::ALL {
            let v = series.channel(axis);
            let (lo, hi) = value_range(&[v]);
            let p = open_panel(&mut doc, index, &format!("{quantity}{axis} ({unit})"), lo, hi, n);
            polyline(&mut doc, &p, v, COLORS[axis.index()]);
            close_panel(&mut doc);
            index += 1;
        }
    }
    let p = open_panel(&mut doc, index, "discomfort", -0.1, 1.1, n);
    polyline(&mut doc, &p, &pulse_values(labels), PULSE_COLOR);
    close_panel(&mut doc);
    time_ticks(&mut doc, TimeAxis::of(accel), n, index);
    Ok(doc.finish())
}

/// Smoothed probability with the decision threshold, above the predicted
/// and (when known) actual pulse trains.
#[allow(clippy::too_many_arguments)]
pub fn render_prediction_figure(
    axis: TimeAxis,
    probabilities: &[f64],
    predicted: &[u8],
    actual: Option<&[u8]>,
    window: usize,
    threshold: f64,
    title: &str,
) -> Result<String> {
    let n = probabilities.len();
    if predicted.len() != n {
        return Err(Error::LengthMismatch { left: n, right: predicted.len() });
    }
    if let Some(a) = actual {
        if a.len() != n {
            return Err(Error::LengthMismatch { left: n, right: a.len() });
        }
    }
    if n == 0 {
        return Err(Error::EmptySignal);
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    // Shrink to the longest odd window the series can hold.
    let largest_odd = if n % 2 == 1 { n } else { n - 1 };
    let smoothed = signal::smooth_channel(probabilities, window.min(largest_odd))?;

    let panels = if actual.is_some() { 3 } else { 2 };
    let mut doc = Doc::new(figure_height(panels), title);
    let p = open_panel(&mut doc, 0, "P (smoothed)", 0.0, 1.0, n);
    horizontal(&mut doc, &p, threshold, "#999999");
    polyline(&mut doc, &p, &smoothed, COLORS[0]);
    close_panel(&mut doc);
    let p = open_panel(&mut doc, 1, "predicted", -0.1, 1.1, n);
    polyline(&mut doc, &p, &pulse_values(predicted), PREDICTED_COLOR);
    close_panel(&mut doc);
    if let Some(a) = actual {
        let p = open_panel(&mut doc, 2, "actual", -0.1, 1.1, n);
        polyline(&mut doc, &p, &pulse_values(a), PULSE_COLOR);
        close_panel(&mut doc);
    }
    time_ticks(&mut doc, axis, n, panels - 1);
    Ok(doc.finish())
}

/// Bar chart of ranked discomfort indexes, value printed above each bar.
pub fn render_index_figure(reports: &[LineIndexReport], title: &str) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::EmptyReport);
    }
    let plot_h = 300.0;
    let height = TOP + 20.0 + plot_h + 60.0;
    let base = TOP + 20.0 + plot_h;
    let mut doc = Doc::new(height, title);
    let _ = writeln!(
        doc.body,
        "<line x1=\"{LEFT:.2}\" y1=\"{base:.2}\" x2=\"{:.2}\" y2=\"{base:.2}\" stroke=\"#333333\"/>\n\
         <line x1=\"{LEFT:.2}\" y1=\"{:.2}\" x2=\"{LEFT:.2}\" y2=\"{base:.2}\" stroke=\"#333333\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1.0</text>\n\
         <text x=\"{:.2}\" y=\"{base:.2}\" text-anchor=\"end\">0.0</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">discomfort index D</text>",
        LEFT + PLOT_W,
        base - plot_h,
        LEFT - 6.0,
        base - plot_h + 4.0,
        LEFT - 6.0,
        LEFT - 40.0,
        base - plot_h / 2.0,
        LEFT - 40.0,
        base - plot_h / 2.0,
    );
    let slot = PLOT_W / reports.len() as f64;
    let bar_w = (slot * 0.6).min(120.0);
    for (i, r) in reports.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let h = plot_h * r.d.clamp(0.0, 1.0);
        let _ = writeln!(
            doc.body,
            "<g class=\"bar\">\n\
             <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"{}\"/>\n\
             <text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.3}</text>\n\
             <text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n\
             </g>",
            cx - bar_w / 2.0,
            base - h,
            COLORS[i % COLORS.len()],
            base - h - 6.0,
            r.d,
            base + 18.0,
            escape(&r.line_id),
        );
    }
    Ok(doc.finish())
}
