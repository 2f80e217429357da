//! Self-contained SVG figures, each with a CSV sidecar holding the plotted numbers.

use crate::commands::{prepare_out, read_logs, write_pair};
use crate::error::{CliError, CliResult};
use rift_core::log::Role;
use std::fmt::Write as _;
use std::path::Path;

pub const PLOT_SCHEMA: &str = "rift-plot-v1";
pub const SPEED_BIN: f64 = 1.0;
pub const ACCEL_BIN: f64 = 0.5;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Lower edge of the first bin, a multiple of `width`.
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let a = self.lo + k as f64 * self.width;
        (a, a + self.width)
    }
}

/// Fixed-width bins aligned to multiples of `width`; a value on an edge falls in the upper bin.
pub fn histogram(values: &[f64], width: f64) -> Histogram {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Histogram {
            lo: 0.0,
            width,
            counts: Vec::new(),
        };
    }
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = (min / width).floor() * width;
    let bin = |v: f64| ((v - lo) / width).floor() as usize;
    let mut counts = vec![0; bin(max) + 1];
    for v in finite {
        counts[bin(v)] += 1;
    }
    Histogram { lo, width, counts }
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn frame(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let font = r#"font-family="sans-serif""#;
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" {font} font-size="16">{title}</text>"#,
        WIDTH / 2.0
    );
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h(), LEFT + plot_w(), TOP);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" {font} font-size="12">{xlabel}</text>"#,
        LEFT + plot_w() / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" {font} font-size="12" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        TOP + plot_h() / 2.0,
        TOP + plot_h() / 2.0
    );
    let tick = |s: &mut String, x: f64, y: f64, anchor: &str, label: String| {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="{anchor}" {font} font-size="10">{label}</text>"#,
            num(x),
            num(y)
        );
    };
    if let Some((a, b)) = x_range {
        tick(&mut s, x0, y0 + 14.0, "start", num(a));
        tick(&mut s, x1, y0 + 14.0, "end", num(b));
    }
    if let Some((a, b)) = y_range {
        tick(&mut s, x0 - 4.0, y0, "end", num(a));
        tick(&mut s, x0 - 4.0, y1 + 4.0, "end", num(b));
    }
    s
}

/// Bar chart of a histogram: the SVG and its `bin_lo,bin_hi,count,bar_height` sidecar.
pub fn histogram_plot(title: &str, xlabel: &str, h: &Histogram) -> (String, String) {
    let mut csv = format!("# schema={PLOT_SCHEMA}\nbin_lo,bin_hi,count,bar_height\n");
    let peak = h.counts.iter().copied().max().unwrap_or(0);
    let ranges = (!h.counts.is_empty()).then(|| {
        let (lo, _) = h.edges(0);
        let (_, hi) = h.edges(h.counts.len() - 1);
        ((lo, hi), (0.0, peak as f64))
    });
    let mut svg = frame(
        title,
        xlabel,
        "count",
        ranges.map(|r| r.0),
        ranges.map(|r| r.1),
    );
    let bar_w = plot_w() / h.counts.len().max(1) as f64;
    for (k, &c) in h.counts.iter().enumerate() {
        let height = if peak == 0 {
            0.0
        } else {
            plot_h() * c as f64 / peak as f64
        };
        let (a, b) = h.edges(k);
        let _ = writeln!(csv, "{},{},{c},{}", num(a), num(b), num(height));
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#4c72b0" stroke="white"/>"##,
            num(LEFT + k as f64 * bar_w),
            num(TOP + plot_h() - height),
            num(bar_w),
            num(height)
        );
    }
    svg.push_str("</svg>\n");
    (svg, csv)
}

/// Polyline through `points`: the SVG and its `x,y,px,py` sidecar.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[(f64, f64)],
) -> (String, String) {
    let mut csv = format!("# schema={PLOT_SCHEMA}\nx,y,px,py\n");
    if points.is_empty() {
        let mut svg = frame(title, xlabel, ylabel, None, None);
        svg.push_str("</svg>\n");
        return (svg, csv);
    }
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (xr, yr) = (
        span(points.iter().map(|p| p.0).collect()),
        span(points.iter().map(|p| p.1).collect()),
    );
    let mut svg = frame(title, xlabel, ylabel, Some(xr), Some(yr));
    let mut path = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let px = LEFT + plot_w() * (x - xr.0) / (xr.1 - xr.0);
        let py = TOP + plot_h() * (1.0 - (y - yr.0) / (yr.1 - yr.0));
        let _ = writeln!(csv, "{},{},{},{}", num(x), num(y), num(px), num(py));
        path.push(format!("{},{}", num(px), num(py)));
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#dd8452" stroke-width="2"/>"##,
        path.join(" ")
    );
    svg.push_str("</svg>\n");
    (svg, csv)
}

/// Mean buffer return per iteration from a `train_stats.jsonl` file.
pub fn returns_by_iteration(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (n, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
        let field = |k: &str| {
            v.get(k)
                .and_then(|x| x.as_f64())
                .ok_or_else(|| format!("line {}: missing numeric `{k}`", n + 1))
        };
        let (it, ret) = (field("iteration")?, field("mean_return")?);
        if points.last().is_none_or(|p| p.0 != it) {
            points.push((it, ret));
        }
    }
    Ok(points)
}

pub fn cmd_plot(stats: Option<&Path>, logs: Option<&Path>, out: &Path) -> CliResult<()> {
    if stats.is_none() && logs.is_none() {
        return Err(CliError::Usage("plot needs --stats and/or --logs".into()));
    }
    let curve = match stats {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(p, e))?;
            Some(
                returns_by_iteration(&text)
                    .map_err(|e| CliError::input(p, rift_core::Error::Parse(e)))?,
            )
        }
        None => None,
    };
    let logs = logs.map(read_logs).transpose()?;
    prepare_out(out)?;
    if let Some(logs) = logs {
        let rows = || {
            logs.iter()
                .flat_map(|l| l.steps.iter().flat_map(|s| s.agents.iter()))
                .filter(|a| a.role == Role::Cbv)
        };
        let speeds: Vec<f64> = rows().map(|a| a.v).collect();
        let accels: Vec<f64> = rows().map(|a| a.a).collect();
        let (svg, csv) = histogram_plot("CBV speed", "speed (m/s)", &histogram(&speeds, SPEED_BIN));
        write_pair(out, "speed_histogram", &svg, &csv)?;
        let (svg, csv) = histogram_plot(
            "CBV acceleration",
            "acceleration (m/s^2)",
            &histogram(&accels, ACCEL_BIN),
        );
        write_pair(out, "accel_histogram", &svg, &csv)?;
    }
    if let Some(points) = curve {
        let (svg, csv) = line_plot(
            "Training return",
            "iteration",
            "mean buffer return",
            &points,
        );
        write_pair(out, "training_return", &svg, &csv)?;
    }
    Ok(())
}
