use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::features::{BearingRecord, Channel, DatasetConfig, LabeledSample, Snapshot, Window, WpdImage};
use crate::model::{ModelConfig, ModelParams};
use crate::signal::SignalVector;
use crate::tensor::Tensor;

pub const RECORD_MAGIC: [u8; 8] = *b"RULREC\0\0";
pub const DATASET_MAGIC: [u8; 8] = *b"RULDSET\0";
pub const CHECKPOINT_MAGIC: [u8; 8] = *b"RULCKPT\0";
pub const CONTAINER_VERSION: u32 = 1;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(path: &'a Path, bytes: &'a [u8], magic: [u8; 8]) -> Result<Self, DataError> {
        let mut r = Self { path, bytes, pos: 0 };
        if r.take(8)? != magic {
            return Err(r.corrupt("bad magic"));
        }
        let found = r.u32()?;
        if found != CONTAINER_VERSION {
            return Err(DataError::VersionMismatch { path: path.to_path_buf(), found, expected: CONTAINER_VERSION });
        }
        Ok(r)
    }

    fn corrupt(&self, reason: impl Into<String>) -> DataError {
        DataError::CorruptContainer { path: self.path.to_path_buf(), reason: reason.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.corrupt(format!("truncated at byte {} (wanted {n} more)", self.pos)));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, DataError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.corrupt("length overflows"))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DataError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.corrupt("length overflows"))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DataError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.corrupt("length overflows"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self) -> Result<T, DataError> {
        let n = self.len()?;
        let raw = self.take(n)?;
        serde_json::from_slice(raw).map_err(|e| self.corrupt(format!("header: {e}")))
    }

    fn finish(&self) -> Result<(), DataError> {
        if self.pos != self.bytes.len() {
            return Err(self.corrupt(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn header(magic: [u8; 8]) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out
}

fn put_json(out: &mut Vec<u8>, value: &impl Serialize) {
    let raw = serde_json::to_vec(value).expect("header serializes");
    out.extend_from_slice(&(raw.len() as u64).to_le_bytes());
    out.extend_from_slice(&raw);
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    fs::write(path, bytes).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordHeader {
    bearing_id: String,
    condition_id: u32,
    snapshot_period_s: f64,
    sample_rate_hz: f64,
    n_snapshots: usize,
    samples_per_snapshot: usize,
}

pub fn save_record(path: &Path, record: &BearingRecord) -> Result<(), DataError> {
    let mut out = header(RECORD_MAGIC);
    put_json(
        &mut out,
        &RecordHeader {
            bearing_id: record.bearing_id.clone(),
            condition_id: record.condition_id,
            snapshot_period_s: record.snapshot_period_s,
            sample_rate_hz: record.sample_rate_hz(),
            n_snapshots: record.len(),
            samples_per_snapshot: record.samples_per_snapshot(),
        },
    );
    for s in record.snapshots() {
        for sig in [&s.horizontal, &s.vertical] {
            for x in sig.samples() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    write(path, &out)
}

pub fn load_record(path: &Path) -> Result<BearingRecord, DataError> {
    let bytes = read(path)?;
    let mut r = Reader::open(path, &bytes, RECORD_MAGIC)?;
    let h: RecordHeader = r.json()?;
    let mut snapshots = Vec::with_capacity(h.n_snapshots.min(1 << 20));
    for _ in 0..h.n_snapshots {
        let mut sig = || -> Result<SignalVector, DataError> {
            let x = r.f64s(h.samples_per_snapshot)?;
            SignalVector::new(x, h.sample_rate_hz).map_err(|e| r.corrupt(e.to_string()))
        };
        let horizontal = sig()?;
        let vertical = sig()?;
        snapshots.push(Snapshot { horizontal, vertical });
    }
    r.finish()?;
    Ok(BearingRecord::new(snapshots, h.snapshot_period_s, h.bearing_id, h.condition_id)?)
}

/// Per-bearing summary stored in a dataset sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BearingMeta {
    pub bearing_id: String,
    pub fpt: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub bearing_id: String,
    pub window_start: usize,
    pub window_size: usize,
}

/// Contents of the JSON sidecar written next to a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub bearings: Vec<BearingMeta>,
    pub config: Option<DatasetConfig>,
    pub samples: Vec<SampleMeta>,
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the binary body to `path` and the metadata to `path` + `.json`.
pub fn save_dataset(
    path: &Path,
    samples: &[LabeledSample],
    bearings: &[BearingMeta],
    config: Option<&DatasetConfig>,
) -> Result<(), DataError> {
    let side = samples.first().map_or(0, |s| s.hor.side);
    if let Some(bad) = samples.iter().find(|s| s.hor.side != side || s.ver.side != side) {
        return Err(DataError::InvalidConfig(format!("mixed image sizes ({} vs {side})", bad.hor.side)));
    }
    let mut out = header(DATASET_MAGIC);
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    out.extend_from_slice(&(side as u32).to_le_bytes());
    out.extend_from_slice(&(side as u32).to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.label.to_le_bytes());
        for p in s.hor.pixels.iter().chain(&s.ver.pixels) {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    let meta = DatasetMeta {
        format_version: CONTAINER_VERSION,
        count: samples.len(),
        height: side,
        width: side,
        bearings: bearings.to_vec(),
        config: config.cloned(),
        samples: samples
            .iter()
            .map(|s| SampleMeta {
                bearing_id: s.bearing_id.clone(),
                window_start: s.hor.source_window.start,
                window_size: s.hor.source_window.size,
            })
            .collect(),
    };
    write(path, &out)?;
    let json = serde_json::to_vec_pretty(&meta).expect("sidecar serializes");
    write(&sidecar_path(path), &json)
}

pub fn load_dataset(path: &Path) -> Result<(Vec<LabeledSample>, DatasetMeta), DataError> {
    let bytes = read(path)?;
    let mut r = Reader::open(path, &bytes, DATASET_MAGIC)?;
    let count = r.len()?;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    if height != width {
        return Err(r.corrupt(format!("non-square images {height}x{width}")));
    }
    let sidecar = sidecar_path(path);
    let meta: DatasetMeta = serde_json::from_slice(&read(&sidecar)?)
        .map_err(|e| DataError::CorruptContainer { path: sidecar.clone(), reason: e.to_string() })?;
    if meta.format_version != CONTAINER_VERSION {
        return Err(DataError::VersionMismatch { path: sidecar, found: meta.format_version, expected: CONTAINER_VERSION });
    }
    if meta.count != count || meta.samples.len() != count || meta.height != height {
        return Err(DataError::CorruptContainer { path: sidecar, reason: "sidecar disagrees with the data file".into() });
    }
    let px = height * width;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for m in &meta.samples {
        let label = r.f32s(1)?[0];
        let window = Window { start: m.window_start, size: m.window_size };
        let image = |pixels, channel| WpdImage { side: height, pixels, channel, source_window: window };
        let hor = image(r.f32s(px)?, Channel::Horizontal);
        let ver = image(r.f32s(px)?, Channel::Vertical);
        samples.push(LabeledSample { hor, ver, label, bearing_id: m.bearing_id.clone() });
    }
    r.finish()?;
    Ok((samples, meta))
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    model: ModelConfig,
    init_seed: u64,
    params: Vec<TensorEntry>,
    extra: serde_json::Value,
}

/// A model configuration with its parameters and free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub params: ModelParams,
    pub extra: serde_json::Value,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), DataError> {
    ckpt.params.check_against(&ckpt.model)?;
    let mut out = header(CHECKPOINT_MAGIC);
    put_json(
        &mut out,
        &CheckpointHeader {
            model: ckpt.model.clone(),
            init_seed: ckpt.params.init_seed,
            params: ckpt
                .params
                .iter()
                .map(|(name, t)| TensorEntry { name: name.to_string(), shape: t.shape().to_vec() })
                .collect(),
            extra: ckpt.extra.clone(),
        },
    );
    for (_, t) in ckpt.params.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    write(path, &out)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, DataError> {
    let bytes = read(path)?;
    let mut r = Reader::open(path, &bytes, CHECKPOINT_MAGIC)?;
    let h: CheckpointHeader = r.json()?;
    let mut names = Vec::with_capacity(h.params.len());
    let mut tensors = Vec::with_capacity(h.params.len());
    for entry in h.params {
        let n = entry.shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| r.corrupt("shape overflows"))?;
        let data = r.f64s(n)?;
        tensors.push(Tensor::new(entry.shape, data).map_err(|e| r.corrupt(e.to_string()))?);
        names.push(entry.name);
    }
    r.finish()?;
    let params = ModelParams::from_parts(h.init_seed, names, tensors);
    params.check_against(&h.model)?;
    Ok(Checkpoint { model: h.model, params, extra: h.extra })
}
