//! Width, depth and Hilbert-level studies and their reports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cascade::{train_cascade, FeatureMode};
use crate::corpus::TargetFunction;
use crate::error::{Error, Result};
use crate::grid::{default_points_per_dim, make_grid, Grid};
use crate::layernet::{train_layernet_lt, BoundReport, ChainConfig};
use crate::shallow::{fit_samples, FitConfig, ShallowNet};

/// Errors at or below this are left out of slope fits.
pub const SLOPE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyAxis {
    #[serde(rename = "width_N")]
    Width,
    #[serde(rename = "depth_l")]
    Depth,
    #[serde(rename = "hilbert_k")]
    HilbertLevel,
}

impl StudyAxis {
    /// Width is fit on `log(axis)`; depth and level on the raw axis value.
    fn log_axis(self) -> bool {
        matches!(self, StudyAxis::Width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub axis_value: f64,
    pub measured_error: f64,
    pub runtime_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub axis_value: f64,
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub function_name: String,
    pub n: usize,
    pub declared_m: u32,
    pub axis: StudyAxis,
    /// Ascending in `axis_value`.
    pub rows: Vec<ReportRow>,
    /// Least-squares slope of `log(error)`; absent with fewer than three usable rows.
    pub fitted_slope: Option<f64>,
    pub config_echo: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<RowFailure>,
    /// Per-row error decomposition (Hilbert-level studies only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundReport>>,
}

impl RateReport {
    fn new(f: &TargetFunction, axis: StudyAxis, config_echo: BTreeMap<String, String>) -> Self {
        Self {
            function_name: f.name.clone(),
            n: f.n,
            declared_m: f.smoothness_m,
            axis,
            rows: Vec::new(),
            fitted_slope: None,
            config_echo,
            failures: Vec::new(),
            bounds: None,
        }
    }

    fn finish(mut self) -> Self {
        self.fitted_slope = fitted_slope(&self.rows, self.axis);
        self
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.measured_error).collect()
    }
}

/// Ordinary least squares slope of `log(error)` against `log(axis)` or `axis`.
pub fn fitted_slope(rows: &[ReportRow], axis: StudyAxis) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.measured_error > SLOPE_FLOOR)
        .map(|r| {
            let x = if axis.log_axis() { r.axis_value.ln() } else { r.axis_value };
            (x, r.measured_error.ln())
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Settings shared by all studies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyConfig {
    pub fit: FitConfig,
    /// Grid density; `None` uses [`default_points_per_dim`] for each function's dimension.
    pub points_per_dim: Option<usize>,
    /// Record wall-clock runtimes. Off by default so reports are reproducible byte for byte.
    pub record_runtime: bool,
}

impl StudyConfig {
    fn grid_for(&self, n: usize) -> Result<Grid> {
        make_grid(n, self.points_per_dim.unwrap_or_else(|| default_points_per_dim(n)))
    }

    fn echo(&self, n: usize) -> BTreeMap<String, String> {
        let fit = &self.fit;
        let mut m = BTreeMap::new();
        m.insert("seed".into(), fit.seed.to_string());
        m.insert("restarts".into(), fit.restarts.to_string());
        m.insert("iterations".into(), fit.iterations.to_string());
        m.insert("step_size".into(), format!("{:e}", fit.step_size));
        m.insert("step_decay".into(), format!("{:e}", fit.step_decay));
        m.insert("init_scale".into(), format!("{:e}", fit.init_scale));
        m.insert("activation".into(), fit.activation.to_string());
        m.insert("optimizer".into(), fit.optimizer.to_string());
        m.insert(
            "grid_points".into(),
            self.points_per_dim.unwrap_or_else(|| default_points_per_dim(n)).to_string(),
        );
        m.insert("record_runtime".into(), self.record_runtime.to_string());
        m
    }

    fn elapsed_ms(&self, start: Instant) -> f64 {
        if self.record_runtime {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn strictly_increasing<T: PartialOrd>(values: &[T], what: &str) -> Result<()> {
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "{what} must be non-empty and strictly increasing"
        )));
    }
    Ok(())
}

/// Error of the best `N`-unit shallow net for each width, warm-starting each width from the
/// previous one padded with zero units so errors never increase. Row `i` uses seed `seed + i`.
pub fn rate_study_shallow(
    functions: &[TargetFunction],
    widths: &[usize],
    cfg: &StudyConfig,
) -> Result<Vec<RateReport>> {
    strictly_increasing(widths, "widths")?;
    if widths[0] == 0 {
        return Err(Error::InvalidArgument("widths must be >= 1".into()));
    }
    functions
        .iter()
        .map(|f| {
            let grid = cfg.grid_for(f.n)?;
            let targets = grid.points().evaluate(&f.as_fn())?;
            let mut echo = cfg.echo(f.n);
            echo.insert("widths".into(), join(widths));
            let mut report = RateReport::new(f, StudyAxis::Width, echo);
            let mut warm: Option<ShallowNet> = None;
            for (i, &units) in widths.iter().enumerate() {
                let seed = cfg.fit.seed.wrapping_add(i as u64);
                let start = Instant::now();
                match fit_samples(grid.points(), &targets, units, &cfg.fit.with_seed(seed), warm.as_ref()) {
                    Ok(fit) => {
                        report.rows.push(ReportRow {
                            axis_value: units as f64,
                            measured_error: fit.error,
                            runtime_ms: cfg.elapsed_ms(start),
                            seed,
                        });
                        warm = Some(fit.net);
                    }
                    Err(e) => report.failures.push(RowFailure {
                        axis_value: units as f64,
                        category: e.category().into(),
                        message: e.to_string(),
                    }),
                }
            }
            Ok(report.finish())
        })
        .collect()
}

/// One cascade run of depth `max_depth` per function; row `j` is the error of the first `j`
/// layers, read from the trace.
pub fn depth_study(
    functions: &[TargetFunction],
    max_depth: usize,
    width: usize,
    mode: FeatureMode,
    cfg: &StudyConfig,
) -> Result<Vec<RateReport>> {
    if max_depth < 2 {
        return Err(Error::InvalidArgument("depth study needs max depth >= 2".into()));
    }
    functions
        .iter()
        .map(|f| {
            let grid = cfg.grid_for(f.n)?;
            let mut echo = cfg.echo(f.n);
            echo.insert("max_depth".into(), max_depth.to_string());
            echo.insert("width".into(), width.to_string());
            echo.insert("mode".into(), mode.to_string());
            let mut report = RateReport::new(f, StudyAxis::Depth, echo);
            let start = Instant::now();
            let fit = train_cascade(f, grid.points(), max_depth, width, mode, &cfg.fit)?;
            let runtime = cfg.elapsed_ms(start);
            report.rows = fit
                .trace
                .cumulative
                .iter()
                .enumerate()
                .map(|(j, &e)| ReportRow {
                    axis_value: (j + 1) as f64,
                    measured_error: e,
                    runtime_ms: runtime,
                    seed: cfg.fit.seed,
                })
                .collect();
            Ok(report.finish())
        })
        .collect()
}

/// Hilbert-reduced layer network per level; rows hold the measured total error and `bounds`
/// the matching decomposition. Row `i` uses seed `seed + i`.
pub fn hilbert_k_study(
    f: &TargetFunction,
    width: usize,
    levels: &[u32],
    depth: usize,
    cfg: &StudyConfig,
    chain: &ChainConfig,
) -> Result<RateReport> {
    strictly_increasing(levels, "levels")?;
    if f.n < 2 || width >= f.n {
        return Err(Error::InvalidArgument(format!(
            "level study needs n >= 2 and width < n (n = {}, width = {width})",
            f.n
        )));
    }
    let grid = cfg.grid_for(f.n)?;
    let mut echo = cfg.echo(f.n);
    echo.insert("levels".into(), join(levels));
    echo.insert("width".into(), width.to_string());
    echo.insert("depth".into(), depth.to_string());
    echo.insert("tau".into(), format!("{:e}", chain.tau));
    echo.insert("tol".into(), format!("{:e}", chain.tol));
    echo.insert("mode".into(), chain.mode.to_string());
    let mut report = RateReport::new(f, StudyAxis::HilbertLevel, echo);
    let mut bounds = Vec::new();
    for (i, &level) in levels.iter().enumerate() {
        let seed = cfg.fit.seed.wrapping_add(i as u64);
        let start = Instant::now();
        match train_layernet_lt(f, &grid, depth, width, level, &cfg.fit.with_seed(seed), chain) {
            Ok((_, bound)) => {
                report.rows.push(ReportRow {
                    axis_value: level as f64,
                    measured_error: bound.total_measured,
                    runtime_ms: cfg.elapsed_ms(start),
                    seed,
                });
                bounds.push(bound);
            }
            Err(e) => report.failures.push(RowFailure {
                axis_value: level as f64,
                category: e.category().into(),
                message: e.to_string(),
            }),
        }
    }
    report.bounds = Some(bounds);
    Ok(report.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Rows only: `axis_value,measured_error,runtime_ms,seed`.
    Csv,
    /// Every field, as JSON.
    Structured,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Structured => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::InvalidArgument(format!("unknown report format '{other}'"))),
        }
    }
}

pub const CSV_HEADER: [&str; 4] = ["axis_value", "measured_error", "runtime_ms", "seed"];

/// Serialises a report; floats in CSV carry 17 significant digits.
pub fn render_report(report: &RateReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let fail = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
            w.write_record(CSV_HEADER).map_err(fail)?;
            for r in &report.rows {
                w.write_record([
                    format!("{:.16e}", r.axis_value),
                    format!("{:.16e}", r.measured_error),
                    format!("{:.16e}", r.runtime_ms),
                    r.seed.to_string(),
                ])
                .map_err(fail)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is ascii"))
        }
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit_report(report: &RateReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = render_report(report, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads the rows of a CSV report.
pub fn read_report_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let float = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])))
            };
            Ok(ReportRow {
                axis_value: float(0)?,
                measured_error: float(1)?,
                runtime_ms: float(2)?,
                seed: rec[3].parse().map_err(|e| bad(format!("seed: {e}")))?,
            })
        })
        .collect()
}

/// Reads a structured report.
pub fn read_report(path: &Path) -> Result<RateReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
