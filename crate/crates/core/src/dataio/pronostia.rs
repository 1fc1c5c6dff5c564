use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::features::{BearingRecord, Snapshot};
use crate::signal::SignalVector;

pub const PRONOSTIA_RATE_HZ: f64 = 25_600.0;
pub const PRONOSTIA_SNAPSHOT_PERIOD_S: f64 = 10.0;

/// Where the acceleration values sit in each CSV row and how files are named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PronostiaLayout {
    pub file_prefix: String,
    pub horizontal_column: usize,
    pub vertical_column: usize,
    pub sample_rate_hz: f64,
    pub snapshot_period_s: f64,
}

impl Default for PronostiaLayout {
    fn default() -> Self {
        Self {
            file_prefix: "acc_".into(),
            horizontal_column: 4,
            vertical_column: 5,
            sample_rate_hz: PRONOSTIA_RATE_HZ,
            snapshot_period_s: PRONOSTIA_SNAPSHOT_PERIOD_S,
        }
    }
}

/// Reads every `acc_NNNNN.csv` in `dir` as one snapshot, ordered by the number.
///
/// Numbers must run 1, 2, ... without gaps. Other files (temperature logs) are
/// ignored. The bearing id is the directory name and the operating condition
/// is parsed from names like `Bearing2_5`.
pub fn load_pronostia_bearing(dir: &Path, layout: &PronostiaLayout) -> Result<BearingRecord, DataError> {
    if !dir.is_dir() {
        return Err(DataError::MissingDirectory(dir.to_path_buf()));
    }
    let io = |source| DataError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_prefix(&layout.file_prefix).and_then(|r| r.strip_suffix(".csv")) else {
            continue;
        };
        if let Ok(n) = stem.parse::<u64>() {
            files.push((n, path));
        }
    }
    if files.is_empty() {
        return Err(DataError::NoSnapshots(dir.to_path_buf()));
    }
    files.sort();
    for (expected, (n, _)) in (1u64..).zip(&files) {
        if *n != expected {
            return Err(DataError::MissingSnapshot { dir: dir.to_path_buf(), index: expected });
        }
    }

    let parsed = parse_all(&files, layout)?;
    let expected = parsed[0].0.len();
    let mut snapshots = Vec::with_capacity(parsed.len());
    for ((h, v), (_, file)) in parsed.into_iter().zip(&files) {
        if h.len() != expected {
            return Err(DataError::InconsistentSnapshotLength { file: file.clone(), got: h.len(), expected });
        }
        let signal = |s| {
            SignalVector::new(s, layout.sample_rate_hz)
                .map_err(|e| DataError::InvalidConfig(format!("{}: {e}", file.display())))
        };
        snapshots.push(Snapshot { horizontal: signal(h)?, vertical: signal(v)? });
    }
    let bearing_id = dir.file_name().and_then(|n| n.to_str()).unwrap_or("bearing").to_string();
    let condition = condition_of(&bearing_id);
    Ok(BearingRecord::new(snapshots, layout.snapshot_period_s, bearing_id, condition)?)
}

fn condition_of(name: &str) -> u32 {
    name.strip_prefix("Bearing")
        .and_then(|r| r.split('_').next())
        .and_then(|c| c.parse().ok())
        .unwrap_or(0)
}

type Channels = (Vec<f64>, Vec<f64>);

fn parse_all(files: &[(u64, PathBuf)], layout: &PronostiaLayout) -> Result<Vec<Channels>, DataError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(files.len());
    let chunk = files.len().div_ceil(workers);
    let parts: Vec<Result<Vec<Channels>, DataError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|(_, f)| parse_file(f, layout)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("parser thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(files.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Rows are split on commas or semicolons; blank lines are skipped.
fn parse_file(file: &Path, layout: &PronostiaLayout) -> Result<Channels, DataError> {
    let text = fs::read_to_string(file).map_err(|source| DataError::Io { path: file.to_path_buf(), source })?;
    let mut h = Vec::new();
    let mut v = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split([',', ';']).map(str::trim).collect();
        let malformed = |reason: String| DataError::MalformedRow { file: file.to_path_buf(), line: i + 1, reason };
        let get = |col: usize| -> Result<f64, DataError> {
            let raw = fields
                .get(col)
                .ok_or_else(|| malformed(format!("{} fields, need column {}", fields.len(), col + 1)))?;
            match raw.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(malformed(format!("column {} is not a finite number: {raw:?}", col + 1))),
            }
        };
        h.push(get(layout.horizontal_column)?);
        v.push(get(layout.vertical_column)?);
    }
    if h.is_empty() {
        return Err(DataError::MalformedRow { file: file.to_path_buf(), line: 0, reason: "file has no rows".into() });
    }
    Ok((h, v))
}
