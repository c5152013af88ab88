//! Line charts of sweep results as self-contained SVG.
//!
//! One polyline per group, at the mean of the metric for each distinct x,
//! with a shaded interquartile band. Each series also carries its data
//! values in `data-x` / `data-y` attributes.

use crate::numeric::percentile_sorted;
use crate::sim::Table;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Synthetic x column: the product of the `N` and `T` columns.
pub const TOTAL_FIXATIONS: &str = "N*T";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    /// Column for the x axis, or `N*T`.
    pub x: String,
    pub metric: String,
    /// Column whose distinct values become separate lines.
    pub group: Option<String>,
    /// Only keep rows whose column equals the value.
    pub filter: Option<(String, String)>,
    pub log_x: bool,
    pub title: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlotError {
    #[error("column '{0}' not found in the CSV")]
    MissingColumn(String),
    #[error("no plottable rows")]
    NoData,
    #[error("log-scale x axis needs positive values, found {0}")]
    NonPositiveLogX(f64),
}

/// One rendered line: `(x, mean, p25, p75)` per distinct x, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64, f64)>,
}

type XValue = Box<dyn Fn(&[String]) -> Option<f64>>;

fn column(table: &Table, name: &str) -> Result<usize, PlotError> {
    table
        .columns
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| PlotError::MissingColumn(name.to_string()))
}

/// Group, filter and summarize the table into plot series.
pub fn build_series(table: &Table, spec: &PlotSpec) -> Result<Vec<Series>, PlotError> {
    let x_of: XValue = if spec.x == TOTAL_FIXATIONS {
        let (n, t) = (column(table, "N")?, column(table, "T")?);
        Box::new(move |r| Some(r[n].parse::<f64>().ok()? * r[t].parse::<f64>().ok()?))
    } else {
        let i = column(table, &spec.x)?;
        Box::new(move |r| r[i].parse().ok())
    };
    let m = column(table, &spec.metric)?;
    let g = spec.group.as_deref().map(|c| column(table, c)).transpose()?;
    let filter = match &spec.filter {
        Some((c, v)) => Some((column(table, c)?, v.clone())),
        None => None,
    };
    let fail = table.columns.iter().position(|c| c == "failed" || c == "skipped");

    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in &table.rows {
        if fail.is_some_and(|i| r[i].trim() == "1") {
            continue;
        }
        if let Some((i, v)) = &filter {
            if r[*i] != *v {
                continue;
            }
        }
        let (Some(x), Ok(y)) = (x_of(r), r[m].trim().parse::<f64>()) else {
            continue;
        };
        let label = g.map(|i| r[i].clone()).unwrap_or_else(|| spec.metric.clone());
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push((x, y)),
            None => groups.push((label, vec![(x, y)])),
        }
    }
    if groups.is_empty() {
        return Err(PlotError::NoData);
    }
    // Numeric group labels plot in numeric order.
    if groups.iter().all(|(l, _)| l.parse::<f64>().is_ok()) {
        groups.sort_by(|a, b| a.0.parse::<f64>().unwrap().total_cmp(&b.0.parse::<f64>().unwrap()));
    }

    let mut series = Vec::new();
    for (label, mut pts) in groups {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut points = Vec::new();
        let mut i = 0;
        while i < pts.len() {
            let x = pts[i].0;
            let mut ys: Vec<f64> = Vec::new();
            while i < pts.len() && pts[i].0 == x {
                ys.push(pts[i].1);
                i += 1;
            }
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            points.push((x, mean, percentile_sorted(&ys, 0.25), percentile_sorted(&ys, 0.75)));
        }
        series.push(Series { label, points });
    }
    if spec.log_x {
        if let Some(&(x, ..)) = series.iter().flat_map(|s| &s.points).find(|p| p.0 <= 0.0) {
            return Err(PlotError::NonPositiveLogX(x));
        }
    }
    Ok(series)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render the table as an SVG document.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> Result<String, PlotError> {
    let series = build_series(table, spec)?;
    let all = || series.iter().flat_map(|s| s.points.iter());
    let tx = |x: f64| if spec.log_x { x.log10() } else { x };
    let (mut x0, mut x1) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(tx(p.0)), b.max(tx(p.0))));
    let (mut y0, mut y1) = all().fold((0f64, f64::NEG_INFINITY), |(a, b), p| (a.min(p.2).min(p.1), b.max(p.3).max(p.1)));
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (pw, ph) = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT, HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
    let sx = |x: f64| MARGIN_LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if let Some(t) = &spec.title {
        let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(t));
    }
    // Axes and ticks.
    let (left, right, top, bottom) = (MARGIN_LEFT, MARGIN_LEFT + pw, MARGIN_TOP, MARGIN_TOP + ph);
    let _ = writeln!(svg, r#"<path class="axes" d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let y = sy(yv);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            tick_label(yv)
        );
        let xt = x0 + f * (x1 - x0);
        let xv = if spec.log_x { 10f64.powf(xt) } else { xt };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            bottom + 16.0,
            tick_label(xv)
        );
    }
    let x_label = if spec.log_x { format!("{} (log scale)", spec.x) } else { spec.x.clone() };
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, left + pw / 2.0, HEIGHT - 12.0, escape(&x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(&spec.metric)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let band: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.3)))
            .chain(s.points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.2))))
            .collect();
        let _ = writeln!(svg, r#"<polygon class="iqr" points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let xs: Vec<String> = s.points.iter().map(|p| p.0.to_string()).collect();
        let ys: Vec<String> = s.points.iter().map(|p| p.1.to_string()).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-group="{}" data-x="{}" data-y="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&s.label),
            xs.join(" "),
            ys.join(" "),
            line.join(" ")
        );
        for p in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(p.0), sy(p.1));
        }
        let ly = top + 16.0 * i as f64 + 8.0;
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, right + 12.0, right + 32.0);
        let label = spec.group.as_ref().map_or(s.label.clone(), |g| format!("{g} = {}", s.label));
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, right + 38.0, ly + 4.0, escape(&label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
