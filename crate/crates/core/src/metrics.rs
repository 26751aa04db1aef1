//! Metric artifacts: a per-round CSV and a JSON-lines round log.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::federation::RoundRecord;

pub const METRICS_CSV: &str = "metrics.csv";
pub const ROUND_LOG: &str = "rounds.jsonl";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no round records to write")]
    Empty,
    #[error("cannot write to {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct CsvRow {
    round: usize,
    acc_full: f64,
    #[serde(rename = "acc_L1")]
    acc_l1: f64,
    #[serde(rename = "acc_M1")]
    acc_m1: f64,
    #[serde(rename = "acc_S1")]
    acc_s1: f64,
    acc_avg: f64,
    waste_rate: f64,
}

pub struct MetricsFiles {
    pub csv: PathBuf,
    pub log: PathBuf,
}

/// Writes `metrics.csv` and `rounds.jsonl` into `out_dir`, creating it.
pub fn emit_metrics(records: &[RoundRecord], out_dir: &Path) -> Result<MetricsFiles, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| MetricsError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let csv_path = out_dir.join(METRICS_CSV);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in records {
        w.serialize(CsvRow {
            round: r.round,
            acc_full: r.acc_full,
            acc_l1: r.acc_l1,
            acc_m1: r.acc_m1,
            acc_s1: r.acc_s1,
            acc_avg: r.acc_avg(),
            waste_rate: r.waste_rate,
        })?;
    }
    w.flush().map_err(io(&csv_path))?;

    let log_path = out_dir.join(ROUND_LOG);
    let file = fs::File::create(&log_path).map_err(io(&log_path))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io(&log_path))?;
    }
    out.flush().map_err(io(&log_path))?;
    Ok(MetricsFiles {
        csv: csv_path,
        log: log_path,
    })
}
