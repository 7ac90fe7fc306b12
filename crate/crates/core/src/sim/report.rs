use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::CurvePoint;
use crate::sim::ExperimentSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int,
    Float,
    Text,
}

/// Header and column types of one CSV product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvSchema {
    pub name: &'static str,
    pub columns: &'static [(&'static str, ColumnType)],
}

use ColumnType::{Float, Int, Text};

pub fn trace_schema() -> CsvSchema {
    CsvSchema {
        name: "trace",
        columns: &[("generation", Int), ("mean_delta", Float), ("std_error", Float)],
    }
}

pub fn summary_schema() -> CsvSchema {
    CsvSchema {
        name: "summary",
        columns: &[
            ("scenario", Text),
            ("scheme", Text),
            ("mean_delta", Float),
            ("std_error", Float),
            ("fluctuation_std", Float),
            ("runs", Int),
            ("generations", Int),
        ],
    }
}

pub fn curve_schema() -> CsvSchema {
    CsvSchema {
        name: "curve",
        columns: &[
            ("episode", Int),
            ("window_reward", Float),
            ("running_reward", Float),
            ("temperature", Float),
        ],
    }
}

pub fn sweep_schema() -> CsvSchema {
    CsvSchema {
        name: "sweep",
        columns: &[
            ("axis", Text),
            ("value", Float),
            ("scheme", Text),
            ("seed", Int),
            ("mean_delta", Float),
            ("std_error", Float),
        ],
    }
}

/// Checks the header and every cell against `schema`; returns the row count.
pub fn validate_csv(path: &Path, schema: &CsvSchema) -> Result<usize> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.0).collect();
    if header != expected {
        return Err(Error::domain(format!(
            "{} csv header {:?} does not match {:?}",
            schema.name, header, expected
        )));
    }
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (cell, &(col, ty)) in rec.iter().zip(schema.columns) {
            let ok = match ty {
                Int => cell.parse::<i64>().is_ok(),
                Float => cell.parse::<f64>().is_ok_and(f64::is_finite),
                Text => !cell.is_empty(),
            };
            if !ok {
                return Err(Error::domain(format!(
                    "{} csv row {}: column {col} has invalid value {cell:?}",
                    schema.name,
                    i + 1
                )));
            }
        }
        rows += 1;
    }
    Ok(rows)
}

pub fn write_trace(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_schema().columns.iter().map(|c| c.0))?;
    for (g, (m, se)) in summary.per_generation.iter().zip(&summary.per_generation_se).enumerate() {
        w.write_record([g.to_string(), m.to_string(), se.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub scheme: String,
    pub mean_delta: f64,
    pub std_error: f64,
    pub fluctuation_std: f64,
    pub runs: usize,
    pub generations: usize,
}

impl SummaryRow {
    pub fn new(scenario: &str, s: &ExperimentSummary) -> Self {
        SummaryRow {
            scenario: scenario.to_string(),
            scheme: s.scheme.clone(),
            mean_delta: s.mean_delta,
            std_error: s.std_error,
            fluctuation_std: s.fluctuation,
            runs: s.runs,
            generations: s.generations,
        }
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(summary_schema().columns.iter().map(|c| c.0))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(curve_schema().columns.iter().map(|c| c.0))?;
    for p in curve {
        w.write_record([
            p.episode.to_string(),
            p.window_reward.to_string(),
            p.running_reward.to_string(),
            p.temperature.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub seed: u64,
    pub mean_delta: f64,
    pub std_error: f64,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(sweep_schema().columns.iter().map(|c| c.0))?;
    }
    w.flush()?;
    Ok(())
}

/// Line chart of per-generation curves as a standalone SVG document.
pub fn render_svg(title: &str, series: &[(&str, &[f64])]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0).max(2);
    let top = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1.0)
        * 1.05;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * v / top;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            PAD - 4.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">generation</text>"#,
        W / 2.0,
        H - 15.0
    );
    for (j, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let pts: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.1},{:.1}", x(i), y(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let ly = PAD + 16.0 * j as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
