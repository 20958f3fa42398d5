//! CSV and JSON artifacts.
//!
//! All writers build the full file in memory and replace the target
//! atomically. Sweep CSVs end with a `# auc=...` comment line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiments::sweep::SweepResult;
use crate::experiments::transfer::TransferPoint;
use crate::persist::write_atomic;
use crate::train::EpochLog;

/// SHA-256 over `"blob <len>\0" ++ bytes`, hex-encoded: the git object
/// hashing scheme with SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: String,
    pub axis_kind: String,
    pub param: f64,
    pub mean: f64,
    pub ste: f64,
    pub n_reps: usize,
    pub auc: f64,
}

pub fn sweep_rows(protocol: &str, result: &SweepResult) -> Vec<SweepRow> {
    result
        .points
        .iter()
        .map(|p| SweepRow {
            protocol: protocol.to_string(),
            axis_kind: result.axis.as_str().to_string(),
            param: p.param,
            mean: p.mean,
            ste: p.ste,
            n_reps: p.n_reps,
            auc: result.auc,
        })
        .collect()
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

pub fn write_sweep_csv(path: &Path, protocol: &str, result: &SweepResult) -> Result<()> {
    let mut bytes = csv_bytes(&sweep_rows(protocol, result))?;
    bytes.extend(format!("# auc={} degenerate={}\n", result.auc, result.auc_degenerate).into_bytes());
    write_atomic(path, &bytes)
}

/// Reads rows back, skipping the footer.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_training_log(path: &Path, logs: &[EpochLog]) -> Result<()> {
    write_atomic(path, &csv_bytes(logs)?)
}

pub fn write_transfer_csv(path: &Path, points: &[TransferPoint]) -> Result<()> {
    write_atomic(path, &csv_bytes(points)?)
}

/// Reproducibility record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Content hashes of input and output checkpoints, keyed by file name.
    pub checkpoints: Vec<(String, String)>,
    pub outputs: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
