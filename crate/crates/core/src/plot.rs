//! SVG rendering of a centred knee-angle series with one marker per repetition.
//!
//! Markers are `<circle class="rep-marker">` nodes and the detection threshold is a
//! `<line class="threshold">`, so downstream tools can pick them out by class.

use std::fmt::Write as _;
use std::path::Path;

use crate::counter::{CenteredSeries, CounterParams, ExerciseIndex};
use crate::error::{Error, Result};

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Linear map from (frame index, centred degrees) to SVG pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotFrame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlotFrame {
    pub fn fit(series: &CenteredSeries, threshold: f64) -> Self {
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (-threshold, -threshold);
        for &(f, v) in &series.values {
            x_min = x_min.min(f as f64);
            x_max = x_max.max(f as f64);
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
        if !x_min.is_finite() {
            (x_min, x_max) = (0.0, 1.0);
        }
        if x_max <= x_min {
            x_max = x_min + 1.0;
        }
        if y_max <= y_min {
            y_min -= 1.0;
            y_max += 1.0;
        }
        PlotFrame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn x_px(&self, frame: f64) -> f64 {
        MARGIN + (frame - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    pub fn y_px(&self, value: f64) -> f64 {
        HEIGHT - MARGIN - (value - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }

    /// Inverse of [`PlotFrame::y_px`].
    pub fn y_value(&self, px: f64) -> f64 {
        self.y_min + (HEIGHT - MARGIN - px) / (HEIGHT - 2.0 * MARGIN) * (self.y_max - self.y_min)
    }
}

pub fn render_svg(series: &CenteredSeries, index: &ExerciseIndex, params: &CounterParams) -> String {
    let threshold = series.threshold(params.std_threshold);
    let frame = PlotFrame::fit(series, threshold);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}">"#,
        frame.x_min, frame.x_max, frame.y_min, frame.y_max
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="16">Exercise count: {}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        index.count
    );
    let zero = frame.y_px(0.0);
    let _ = writeln!(
        svg,
        r##"<line class="zero" x1="{MARGIN}" y1="{zero:.3}" x2="{}" y2="{zero:.3}" stroke="#bbbbbb"/>"##,
        WIDTH - MARGIN
    );
    let ty = frame.y_px(-threshold);
    let _ = writeln!(
        svg,
        r##"<line class="threshold" data-value="{}" x1="{MARGIN}" y1="{ty}" x2="{}" y2="{ty}" stroke="#d62728" stroke-dasharray="6 4"/>"##,
        -threshold,
        WIDTH - MARGIN
    );

    svg.push_str(r##"<polyline class="signal" fill="none" stroke="#1f77b4" stroke-width="1" points=""##);
    for (i, &(f, v)) in series.values.iter().enumerate() {
        if i > 0 {
            svg.push(' ');
        }
        let _ = write!(svg, "{:.3},{:.3}", frame.x_px(f as f64), frame.y_px(v));
    }
    svg.push_str("\"/>\n");

    for (k, rep) in index.reps.iter().enumerate() {
        let _ = writeln!(
            svg,
            r##"<circle class="rep-marker" data-rep="{}" data-frame="{}" cx="{:.3}" cy="{:.3}" r="4" fill="#ff7f0e"/>"##,
            k + 1,
            rep.frame_index,
            frame.x_px(rep.frame_index as f64),
            frame.y_px(rep.peak_depth)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn render_plot(
    series: &CenteredSeries,
    index: &ExerciseIndex,
    params: &CounterParams,
    out_path: impl AsRef<Path>,
) -> Result<()> {
    let path = out_path.as_ref();
    std::fs::write(path, render_svg(series, index, params)).map_err(|e| Error::io(path, e))
}
