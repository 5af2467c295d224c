//! CSV and JSON writers. Every file is written to a temporary sibling and
//! renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::runner::RunReport;
use crate::studies::{RRatioPoint, Table2Row};

/// Header of a per-run trace file.
pub const TRACE_HEADER: [&str; 5] = ["iteration", "metric", "objective", "factor", "seconds"];

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| BenchError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| BenchError::io(path, e))
}

fn csv_bytes<F>(fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w)?;
    w.into_inner().map_err(|e| BenchError::io("<csv buffer>", e.into_error()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// The trace of one run as CSV text.
pub fn trace_csv(report: &RunReport) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(TRACE_HEADER)?;
        for r in &report.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:e}", r.metric),
                format!("{:e}", r.objective),
                opt(r.factor),
                format!("{:e}", r.seconds),
            ])?;
        }
        Ok(())
    })
}

/// Drops the wall-clock column so reruns can be compared byte for byte.
pub fn deterministic_view(csv_text: &str) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let cols: Vec<&str> = header.split(',').collect();
    let keep: Vec<bool> = cols.iter().map(|c| *c != "seconds").collect();
    std::iter::once(header)
        .chain(lines)
        .map(|l| {
            l.split(',')
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(f, _)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes `<name>.csv` and `<name>.json` under `dir`.
pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    let name = &report.config.name;
    atomic_write(&dir.join(format!("{name}.csv")), &trace_csv(report)?)?;
    atomic_write(&dir.join(format!("{name}.json")), &serde_json::to_vec_pretty(report)?)
}

fn summary_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record([
            "name",
            "solver",
            "iterations",
            "converged",
            "final_metric",
            "measured_factor",
            "predicted_factor",
            "r_ratio",
            "seconds",
        ])?;
        for r in reports {
            w.write_record([
                r.config.name.clone(),
                format!("{:?}", r.config.solver.kind),
                r.iterations.to_string(),
                r.converged.to_string(),
                format!("{:e}", r.final_metric()),
                opt(r.measured_factor),
                opt(r.predicted_factor),
                opt(r.r_ratio),
                format!("{:e}", r.seconds),
            ])?;
        }
        Ok(())
    })
}

/// Metric per iteration side by side, one column per run.
pub fn comparison_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    let len = reports.iter().map(|r| r.records.len()).max().unwrap_or(0);
    csv_bytes(|w| {
        let mut header = vec!["iteration".to_string()];
        header.extend(reports.iter().map(|r| r.config.name.clone()));
        w.write_record(&header)?;
        for k in 0..len {
            let mut row = vec![k.to_string()];
            row.extend(
                reports
                    .iter()
                    .map(|r| r.records.get(k).map_or_else(String::new, |x| format!("{:e}", x.metric))),
            );
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Per-run traces plus `summary.csv` and `comparison.csv`.
pub fn emit_plotdata(dir: &Path, reports: &[RunReport]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in reports {
        write_report(dir, r)?;
        written.push(dir.join(format!("{}.csv", r.config.name)));
    }
    for (file, bytes) in [("summary.csv", summary_csv(reports)?), ("comparison.csv", comparison_csv(reports)?)] {
        let p = dir.join(file);
        atomic_write(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

pub fn write_table2(dir: &Path, rows: &[Table2Row]) -> Result<PathBuf> {
    let p = dir.join("table2.csv");
    atomic_write(&p, &rows_csv(rows)?)?;
    Ok(p)
}

pub fn write_rratio(dir: &Path, points: &[RRatioPoint]) -> Result<PathBuf> {
    let p = dir.join("rratio.csv");
    atomic_write(&p, &rows_csv(points)?)?;
    Ok(p)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &serde_json::to_vec_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_seconds_column() {
        let text = "iteration,metric,seconds\n0,1e0,0.5\n1,2e-1,0.7";
        assert_eq!(deterministic_view(text), "iteration,metric\n0,1e0\n1,2e-1");
    }
}
