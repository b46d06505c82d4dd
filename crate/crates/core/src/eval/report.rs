//! CSV and self-contained SVG reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::Result;
use crate::indicators::ProgressSeries;
use crate::sim::{ExecutionTrace, TaskKind};

use super::experiment::{ExperimentOutput, SummaryRow};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn kind_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Map => "map",
        TaskKind::Reduce => "reduce",
    }
}

pub fn write_progress_csv(series: &[ProgressSeries], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_ms", "indicator", "estimated_progress", "optimal_progress", "error"])?;
    for s in series {
        for p in &s.points {
            w.write_record([
                p.t.0.to_string(),
                s.indicator.clone(),
                p.estimated.to_string(),
                p.optimal.to_string(),
                p.error().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_swimlanes_csv(trace: &ExecutionTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task_id", "worker", "start_ms", "end_ms", "kind"])?;
    for task in trace.tasks() {
        w.write_record([
            task.task_id.to_string(),
            task.worker.to_string(),
            task.start.0.to_string(),
            task.end.0.to_string(),
            kind_name(task.kind).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["indicator", "avgErr", "maxErr", "overhead"])?;
    for r in rows {
        w.write_record([
            r.indicator.clone(),
            r.avg_err.to_string(),
            r.max_err.to_string(),
            r.overhead.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep-level summary: one row per (value, indicator).
pub fn write_sweep_summary_csv(
    field: &str,
    runs: &[(Option<Value>, ExperimentOutput)],
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "value", "indicator", "avgErr", "maxErr", "overhead"])?;
    for (value, out) in runs {
        let value = value.as_ref().map(Value::to_string).unwrap_or_default();
        for r in &out.summary {
            w.write_record([
                field.to_string(),
                value.clone(),
                r.indicator.clone(),
                r.avg_err.to_string(),
                r.max_err.to_string(),
                r.overhead.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn svg_header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Estimated progress of every indicator plus the optimal diagonal.
pub fn progress_svg(series: &[ProgressSeries]) -> String {
    let mut out = String::new();
    svg_header(&mut out, "Reduce phase progress");
    axes(&mut out, "time since reduce start (s)", "progress (%)");
    let t0 = series
        .iter()
        .flat_map(|s| s.points.first())
        .map(|p| p.t.0)
        .min()
        .unwrap_or(0);
    let t1 = series
        .iter()
        .flat_map(|s| s.points.last())
        .map(|p| p.t.0)
        .max()
        .unwrap_or(t0 + 1)
        .max(t0 + 1);
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.estimated.max(p.optimal)))
        .fold(100.0f64, f64::max)
        .min(300.0);
    let x = |t: u64| MARGIN + (t - t0) as f64 / (t1 - t0) as f64 * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - v.min(y_max) / y_max * (HEIGHT - 2.0 * MARGIN);
    for tick in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{tick}</text>"#,
            MARGIN - 4.0,
            y(tick) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{:.0}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        (t1 - t0) as f64 / 1000.0
    );
    // (label, colour, points)
    type Line<'a> = (String, &'a str, Vec<(u64, f64)>);
    let mut lines: Vec<Line> = Vec::new();
    if let Some(first) = series.first() {
        lines.push((
            "Optimal".into(),
            "#555555",
            first.points.iter().map(|p| (p.t.0, p.optimal)).collect(),
        ));
    }
    for (i, s) in series.iter().enumerate() {
        lines.push((
            s.indicator.clone(),
            PALETTE[i % PALETTE.len()],
            s.points.iter().map(|p| (p.t.0, p.estimated)).collect(),
        ));
    }
    for (i, (name, colour, pts)) in lines.iter().enumerate() {
        let mut d = String::new();
        for (j, &(t, v)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.1} {:.1} ", if j == 0 { "M" } else { "L" }, x(t), y(v));
        }
        let dash = if i == 0 { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{colour}" fill="none" stroke-width="1.5"{dash}/>"#,
            d.trim_end()
        );
        let ly = MARGIN + 4.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#,
            MARGIN + 10.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One lane per slot; map tasks in grey, reduce tasks in blue.
pub fn swimlanes_svg(trace: &ExecutionTrace) -> String {
    let mut out = String::new();
    svg_header(&mut out, "Task swimlanes");
    axes(&mut out, "time (s)", "slot");
    let lanes = trace.tasks().map(|t| t.slot + 1).max().unwrap_or(1) as f64;
    let end = trace.job_end().0.max(1) as f64;
    let lane_h = (HEIGHT - 2.0 * MARGIN) / lanes;
    let x = |t: u64| MARGIN + t as f64 / end * (WIDTH - 2.0 * MARGIN);
    for task in trace.tasks() {
        let colour = match task.kind {
            TaskKind::Map => "#9e9e9e",
            TaskKind::Reduce => "#1f77b4",
        };
        let top = MARGIN + task.slot as f64 * lane_h + 1.0;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{colour}" stroke="white"><title>{} {} on worker {}</title></rect>"#,
            x(task.start.0),
            top,
            (x(task.end.0) - x(task.start.0)).max(0.5),
            (lane_h - 2.0).max(1.0),
            kind_name(task.kind),
            task.task_id,
            task.worker
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{:.0}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        end / 1000.0
    );
    out.push_str("</svg>\n");
    out
}

/// Writes progress.csv, swimlanes.csv, summary.csv, progress.svg and
/// swimlanes.svg into `dir`, creating it if needed.
pub fn emit_reports(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths: Vec<PathBuf> = ["progress.csv", "swimlanes.csv", "summary.csv", "progress.svg", "swimlanes.svg"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_progress_csv(&out.series, &paths[0])?;
    write_swimlanes_csv(&out.trace, &paths[1])?;
    write_summary_csv(&out.summary, &paths[2])?;
    fs::write(&paths[3], progress_svg(&out.series))?;
    fs::write(&paths[4], swimlanes_svg(&out.trace))?;
    Ok(paths)
}
