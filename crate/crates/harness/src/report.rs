//! CSV emitters. JSON reports are the serde forms of the same types.

use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;

use crate::experiment::ResultRow;
use crate::reference::ComparisonReport;
use crate::sweep::{CellResult, CellStatus};

const ROW_HEADER: [&str; 7] = [
    "label",
    "model",
    "params",
    "overall_accuracy",
    "average_accuracy",
    "train_seconds",
    "seed",
];

fn params_json(params: &std::collections::BTreeMap<String, Value>) -> String {
    serde_json::to_string(params).expect("params serialize")
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn rows_csv<W: Write>(sink: W, rows: &[ResultRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(ROW_HEADER).map_err(to_io)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.model.to_string(),
            params_json(&r.params),
            format!("{:.6}", r.overall_accuracy),
            format!("{:.6}", r.average_accuracy),
            format!("{:.3}", r.train_seconds),
            r.seed.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}

pub fn write_rows_csv(path: &Path, rows: &[ResultRow]) -> io::Result<()> {
    rows_csv(std::fs::File::create(path)?, rows)
}

/// One line per cell, failures included, with a `status` column.
pub fn cells_csv<W: Write>(sink: W, cells: &[CellResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "index",
        "status",
        "label",
        "params",
        "overall_accuracy",
        "average_accuracy",
        "train_seconds",
        "seed",
        "error",
    ])
    .map_err(to_io)?;
    for c in cells {
        let record = match &c.status {
            CellStatus::Completed { row, resumed, .. } => [
                c.index.to_string(),
                if *resumed { "resumed" } else { "completed" }.to_string(),
                c.label.clone(),
                params_json(&c.params),
                format!("{:.6}", row.overall_accuracy),
                format!("{:.6}", row.average_accuracy),
                format!("{:.3}", row.train_seconds),
                row.seed.to_string(),
                String::new(),
            ],
            CellStatus::Failed { stage, error } => [
                c.index.to_string(),
                "failed".to_string(),
                c.label.clone(),
                params_json(&c.params),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("{stage}: {error}"),
            ],
        };
        w.write_record(record).map_err(to_io)?;
    }
    w.flush()
}

pub fn write_cells_csv(path: &Path, cells: &[CellResult]) -> io::Result<()> {
    cells_csv(std::fs::File::create(path)?, cells)
}

pub fn comparison_csv<W: Write>(sink: W, report: &ComparisonReport) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "reference_id",
        "label",
        "model",
        "expected",
        "observed",
        "band",
        "margin",
        "passed",
        "expected_average",
        "implied_average",
        "average_consistent",
    ])
    .map_err(to_io)?;
    for e in &report.entries {
        w.write_record([
            e.reference_id.clone(),
            e.label.clone(),
            e.model.to_string(),
            format!("{:.6}", e.expected),
            format!("{:.6}", e.observed),
            e.band.to_string(),
            format!("{:.6}", e.margin),
            e.passed.to_string(),
            format!("{:.6}", e.expected_average),
            format!("{:.6}", e.implied_average),
            e.average_consistent.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}
