//! Metric rows and their CSV / JSON-lines writers. Values survive the
//! round trip losslessly: floats are printed with the shortest
//! representation that parses back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// One experiment measurement: coordinates identify the cell, metric
/// fields are filled per experiment, and failures are recorded in `error`
/// so a sweep can continue past them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub frames: usize,
    #[serde(default)]
    pub frame: Option<usize>,
    #[serde(default)]
    pub regime: Option<String>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub m_over_n: Option<f64>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub inner_iters: Option<usize>,
    #[serde(default)]
    pub rmse: Option<f64>,
    #[serde(default)]
    pub rmse_q1: Option<f64>,
    #[serde(default)]
    pub rmse_q3: Option<f64>,
    #[serde(default)]
    pub rmse_l: Option<f64>,
    #[serde(default)]
    pub f1: Option<f64>,
    #[serde(default)]
    pub f1_q1: Option<f64>,
    #[serde(default)]
    pub f1_q3: Option<f64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub wall_time_s: Option<f64>,
    #[serde(default)]
    pub per_iteration_time_s: Option<f64>,
    #[serde(default)]
    pub converged: Option<bool>,
    /// Extra outer iterations relative to a baseline, in percent
    /// (warm-start study).
    #[serde(default)]
    pub extra_pct: Option<f64>,
    /// Marks the per-method sweep winner.
    #[serde(default)]
    pub selected: Option<bool>,
    #[serde(default)]
    pub error: Option<String>,
}

impl MetricsRow {
    pub fn new(experiment: &str, method: &str, seed: u64, n: usize, frames: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            method: method.to_string(),
            seed,
            n,
            frames,
            ..Self::default()
        }
    }
}

pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let file = File::create(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn write_jsonl(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<MetricsRow> {
        let mut a = MetricsRow::new("regimes", "uot", 17, 100, 2);
        a.regime = Some("growth".into());
        a.sigma = Some(0.1);
        a.rate = Some(0.5);
        a.kappa = Some(0.031_622_776_601_683_794);
        a.mu = Some(1.0 / 3.0);
        a.rmse = Some(0.123_456_789_012_345_67);
        a.iterations = Some(250);
        a.converged = Some(true);
        let mut b = MetricsRow::new("regimes", "bot", 18, 100, 2);
        b.error = Some("solver diverged, kept going".into());
        vec![a, b]
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = sample_rows();
        write_csv(&path, &rows).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = sample_rows();
        write_jsonl(&path, &rows).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(rows, back);
    }
}
