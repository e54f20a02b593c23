//! Convergence reports: CSV rows and a self-contained log-log SVG plot.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::stein_bounds::Mode;

fn sci<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{x:.16e}"))
}

fn sci_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&format!("{v:.16e}")),
        None => s.serialize_none(),
    }
}

/// One window size. Mode-specific and failed quantities are `None`
/// (an empty CSV cell); `status` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "T", serialize_with = "sci")]
    pub t: f64,
    #[serde(serialize_with = "sci")]
    pub u_eff: f64,
    #[serde(rename = "R")]
    pub replicates: usize,
    #[serde(rename = "W1_emp", serialize_with = "sci_opt")]
    pub w1_emp: Option<f64>,
    #[serde(rename = "W1_stderr_proxy", serialize_with = "sci_opt")]
    pub w1_stderr_proxy: Option<f64>,
    /// `sigma^2` (fixed) or the exact `Var(S_T)` (moving).
    #[serde(serialize_with = "sci_opt")]
    pub sigma2_or_var: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub mean_raw: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub expected_mean: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub mean_se: Option<f64>,
    pub mean_check: Option<bool>,
    #[serde(serialize_with = "sci_opt")]
    pub var_normalized: Option<f64>,
    pub var_check: Option<bool>,
    #[serde(serialize_with = "sci_opt")]
    pub bound_total: Option<f64>,
    pub n_trunc: Option<usize>,
    #[serde(serialize_with = "sci_opt")]
    pub d1: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub d2: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub d3: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub term_body: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub term_tail: Option<f64>,
    /// Exact over asymptotic variance (moving mode).
    #[serde(serialize_with = "sci_opt")]
    pub var_ratio: Option<f64>,
    /// Whether the level schedule satisfies the convergence condition (moving mode).
    pub corollary_condition: Option<bool>,
    pub status: String,
}

impl ReportRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub mode: Mode,
    pub rows: Vec<ReportRow>,
    /// Moving mode: `Some(false)` marks a schedule outside the convergence regime.
    pub corollary_holds: Option<bool>,
}

impl ConvergenceReport {
    pub fn non_convergence_flag(&self) -> bool {
        self.corollary_holds == Some(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

pub fn emit_report(report: &ConvergenceReport, path: &Path, format: ReportFormat) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::EmptyReport);
    }
    match format {
        ReportFormat::Csv => write_csv(&report.rows, path),
        ReportFormat::Svg => std::fs::write(path, render_svg(report)).map_err(|e| Error::io(path, e)),
    }
}

fn write_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 55.0); // left, right, top, bottom

fn log_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    Some(if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) })
}

/// Log-log plot of `W1_emp` and `bound_total` against `T`.
pub fn render_svg(report: &ConvergenceReport) -> String {
    let rows = &report.rows;
    let x_range = log_range(rows.iter().map(|r| r.t)).unwrap_or((0.0, 1.0));
    let y_range = log_range(rows.iter().flat_map(|r| [r.w1_emp, r.bound_total]).flatten())
        .unwrap_or((-3.0, 0.0));
    let (left, right, top, bottom) = MARGIN;
    let (pw, ph) = (WIDTH - left - right, HEIGHT - top - bottom);
    let px = |x: f64| left + (x.log10() - x_range.0) / (x_range.1 - x_range.0) * pw;
    let py = |y: f64| top + (y_range.1 - y.log10()) / (y_range.1 - y_range.0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in x_range.0 as i32..=x_range.1 as i32 {
        let x = px(10f64.powi(k));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">1e{k}</text>"#,
            y0 = top + ph,
            y1 = top + ph + 5.0,
            ty = top + ph + 18.0
        );
    }
    for k in y_range.0 as i32..=y_range.1 as i32 {
        let y = py(10f64.powi(k));
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">1e{k}</text>"#,
            x0 = left - 5.0,
            tx = left - 8.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle">T (window edge)</text>
<text x="16" y="{yl:.2}" text-anchor="middle" transform="rotate(-90 16 {yl:.2})">Wasserstein-1 distance</text>
<text x="{x:.2}" y="18" text-anchor="middle">{mode} level: empirical W1 and bound</text>"#,
        x = left + pw / 2.0,
        y = HEIGHT - 12.0,
        yl = top + ph / 2.0,
        mode = report.mode
    );
    let series = [
        ("W1_emp", "#1f77b4", rows.iter().filter_map(|r| Some((r.t, r.w1_emp?))).collect::<Vec<_>>()),
        ("bound_total", "#d62728", rows.iter().filter_map(|r| Some((r.t, r.bound_total?))).collect()),
    ];
    for (i, (name, colour, pts)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> =
            pts.iter().copied().filter(|&(_, y)| y > 0.0 && y.is_finite()).collect();
        if !pts.is_empty() {
            let path: Vec<String> =
                pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                path.join(" ")
            );
            for &(x, y) in &pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                    px(x),
                    py(y)
                );
            }
        }
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{a:.2}" y1="{ly:.2}" x2="{b:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/><text x="{c:.2}" y="{ty:.2}">{name}</text>"#,
            a = left + pw - 130.0,
            b = left + pw - 105.0,
            c = left + pw - 100.0,
            ty = ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
