//! Minimal static SVG line plots.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{AdvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxesSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    /// Optional vertical marker, in data coordinates (e.g. the threshold).
    pub marker: Option<f64>,
    pub marker_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YSeries {
    pub name: String,
    pub values: Vec<f64>,
}

/// Shared x values with one or more y series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub x: Vec<f64>,
    pub series: Vec<YSeries>,
    pub axes: AxesSpec,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
/// Floor applied to nonpositive y values on a log axis (relative to the largest value).
const LOG_Y_FLOOR: f64 = 1e-12;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    vals.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - d, hi + d)
    }
}

/// Renders a line plot: one polyline per series, optional vertical marker.
pub fn emit_svg(plot: &PlotData) -> Result<String> {
    if plot.x.is_empty() || plot.series.is_empty() {
        return Err(AdvError::InvalidArgument("cannot plot an empty table".into()));
    }
    for s in &plot.series {
        if s.values.len() != plot.x.len() {
            return Err(AdvError::DimensionMismatch {
                expected: plot.x.len(),
                got: s.values.len(),
                context: "plot series length",
            });
        }
    }
    let log_x = plot.axes.x_scale == Scale::Log;
    let log_y = plot.axes.y_scale == Scale::Log;
    if log_x {
        if let Some(bad) = plot.x.iter().find(|v| !(**v > 0.0)) {
            return Err(AdvError::InvalidArgument(format!("log-scale x axis needs positive values (got {bad})")));
        }
    }
    let ymax = bounds(plot.series.iter().flat_map(|s| s.values.iter().copied())).map(|b| b.1);
    let yfloor = ymax.filter(|m| *m > 0.0).map(|m| m * LOG_Y_FLOOR).unwrap_or(LOG_Y_FLOOR);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.max(yfloor).log10() } else { v };

    let xr = pad(bounds(plot.x.iter().map(|&v| tx(v))).ok_or_else(|| AdvError::InvalidArgument("no finite x".into()))?);
    let yr = pad(
        bounds(plot.series.iter().flat_map(|s| s.values.iter().map(|&v| ty(v))))
            .ok_or_else(|| AdvError::InvalidArgument("no finite y".into()))?,
    );
    let px = |v: f64| LEFT + (tx(v) - xr.0) / (xr.1 - xr.0) * (W - LEFT - RIGHT);
    let py = |v: f64| H - BOTTOM - (ty(v) - yr.0) / (yr.1 - yr.0) * (H - TOP - BOTTOM);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(&plot.axes.title));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0,
        escape(&plot.axes.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {})">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(&plot.axes.y_label)
    );
    for (k, v) in [xr.0, xr.1].into_iter().enumerate() {
        let shown = if log_x { 10f64.powf(v) } else { v };
        let x = if k == 0 { LEFT } else { W - RIGHT };
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="11">{shown:.3e}</text>"#, H - BOTTOM + 16.0);
    }
    for (k, v) in [yr.0, yr.1].into_iter().enumerate() {
        let shown = if log_y { 10f64.powf(v) } else { v };
        let y = if k == 0 { H - BOTTOM } else { TOP };
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{shown:.3e}</text>"#, LEFT - 4.0);
    }
    if let Some(m) = plot.axes.marker.filter(|m| m.is_finite() && (!log_x || *m > 0.0)) {
        let x = px(m);
        let _ = writeln!(
            out,
            r#"<line class="marker" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="black" stroke-dasharray="4 3"/>"#,
            H - BOTTOM
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" font-size="11">{}</text>"#, x + 3.0, TOP + 12.0, escape(&plot.axes.marker_label));
    }
    for (k, s) in plot.series.iter().enumerate() {
        let pts: Vec<String> = plot
            .x
            .iter()
            .zip(&s.values)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.name)
        );
        if plot.series.len() <= PALETTE.len() {
            let ly = TOP + 16.0 + 14.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
                W - RIGHT - 150.0,
                escape(&s.name)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes(x_scale: Scale) -> AxesSpec {
        AxesSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_scale,
            y_scale: Scale::Linear,
            marker: Some(1.5),
            marker_label: "m".into(),
        }
    }

    #[test]
    fn two_points_one_segment() {
        let plot = PlotData {
            x: vec![1.0, 2.0],
            series: vec![YSeries { name: "a".into(), values: vec![0.0, 1.0] }],
            axes: axes(Scale::Linear),
        };
        let svg = emit_svg(&plot).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
        assert!(svg.contains("class=\"marker\""));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn rejects_empty_and_nonpositive_log() {
        let empty = PlotData { x: vec![], series: vec![], axes: axes(Scale::Linear) };
        assert!(emit_svg(&empty).is_err());
        let bad = PlotData {
            x: vec![0.0, 1.0],
            series: vec![YSeries { name: "a".into(), values: vec![1.0, 2.0] }],
            axes: axes(Scale::Log),
        };
        assert!(emit_svg(&bad).is_err());
    }
}
