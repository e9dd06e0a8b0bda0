//! Trace and table writers.

use std::fmt::Write as _;
use std::path::Path;

use bregman_qn::{SolverTrace, TraceKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("expected `csv` or `json`, got `{s}`")),
        }
    }
}

/// One row of an exported optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub alpha: Option<f64>,
    #[serde(rename = "det_B")]
    pub det_b: f64,
    #[serde(rename = "sTy")]
    pub s_ty: Option<f64>,
    pub skipped: bool,
}

pub const TRACE_HEADER: &str = "iter,f,grad_norm,alpha,det_B,sTy,skipped";

pub fn trace_rows(trace: &SolverTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            f: r.f,
            grad_norm: r.grad_norm,
            alpha: r.alpha,
            det_b: r.det_b,
            s_ty: r.s_ty,
            skipped: r.skipped,
        })
        .collect()
}

/// Shortest round-tripping decimal, in exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.f),
            fmt_f64(r.grad_norm),
            fmt_opt(r.alpha),
            fmt_f64(r.det_b),
            fmt_opt(r.s_ty),
            r.skipped
        );
    }
    out
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn render_trace(rows: &[TraceRow], format: Format) -> String {
    match format {
        Format::Csv => trace_csv(rows),
        Format::Json => to_json(rows),
    }
}

/// Writes a trace as CSV or JSON.
pub fn export_trace(trace: &SolverTrace, path: &Path, format: Format) -> Result<(), CliError> {
    write_file(path, &render_trace(&trace_rows(trace), format))
}

pub fn read_trace_json(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Whitespace-separated columns with a `#` header, readable by gnuplot.
pub fn gnuplot_data(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = format!("# {}\n", columns.join(" "));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn trace_kind_name(kind: TraceKind) -> &'static str {
    match kind {
        TraceKind::SecantGap => "secant_gap",
        TraceKind::ToReference => "to_reference",
        TraceKind::Successive => "successive",
    }
}

/// A divergence trace from a sparse update run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceTrace {
    pub algorithm: u8,
    pub potential: String,
    pub trace_kind: String,
    pub seed: u64,
    pub divergence: Vec<f64>,
}

pub fn divergence_csv(trace: &DivergenceTrace) -> String {
    let mut out = String::from("t,kind,divergence\n");
    for (t, d) in trace.divergence.iter().enumerate() {
        let _ = writeln!(out, "{t},{},{}", trace.trace_kind, fmt_f64(*d));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
