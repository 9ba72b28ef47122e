use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lab::ExperimentReport;

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    label: &'a str,
    n: usize,
    trial: usize,
    relative_error: Option<f64>,
    final_error: Option<f64>,
    trajectory_sup: Option<f64>,
    msq_relative_error: Option<f64>,
    generalization_error: Option<f64>,
    bound_ratio: Option<f64>,
    increment_ratio: Option<f64>,
}

/// One row per trial record; absent values are empty cells.
pub fn write_records_csv(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in &report.records {
        w.serialize(CsvRow {
            experiment: report.experiment.name(),
            label: r.label.as_deref().unwrap_or(""),
            n: r.n,
            trial: r.trial,
            relative_error: r.relative_error,
            final_error: r.final_error,
            trajectory_sup: r.trajectory_sup,
            msq_relative_error: r.msq_relative_error,
            generalization_error: r.generalization_error,
            bound_ratio: r.bound_ratio,
            increment_ratio: r.increment_ratio,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}
