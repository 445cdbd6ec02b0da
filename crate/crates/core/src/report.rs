//! Tabular and JSON serialisation of grid results.

use crate::error::{Error, Result};
use crate::runner::RunResult;

pub const CSV_HEADER: [&str; 11] = [
    "run_key",
    "model",
    "W",
    "rmse",
    "rmse_of_mean",
    "block_mean_rmse",
    "mae",
    "mape",
    "seed",
    "hyperparams",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Results in canonical order: preparation, test size, model, window.
pub fn sorted(results: &[RunResult]) -> Vec<RunResult> {
    let mut v = results.to_vec();
    v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    v
}

pub fn report(results: &[RunResult], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => to_csv(results),
        ReportFormat::Json => to_json(results),
    }
}

pub fn to_csv(results: &[RunResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in sorted(results) {
        let m = r.metrics;
        w.write_record([
            r.run_key.clone(),
            r.model.code().to_string(),
            r.window.map(|x| x.to_string()).unwrap_or_default(),
            num(m.map(|m| m.rmse)),
            num(m.map(|m| m.rmse_of_mean)),
            num(m.map(|m| m.block_mean_rmse)),
            num(m.map(|m| m.mae)),
            num(m.map(|m| m.mape)),
            r.seed.to_string(),
            serde_json::to_string(&r.chosen_hyperparams).expect("candidate serializes"),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn to_json(results: &[RunResult]) -> String {
    let mut s = serde_json::to_string_pretty(&sorted(results)).expect("results serialize");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<Vec<RunResult>> {
    serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("results JSON: {e}")))
}
