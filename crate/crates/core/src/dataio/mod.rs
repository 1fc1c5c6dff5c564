//! PRONOSTIA ingestion, the synthetic run-to-failure generator, and the
//! binary containers for records, datasets and checkpoints.

mod container;
mod pronostia;
mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

use crate::features::FeatureError;
use crate::model::ModelError;

pub use container::{
    load_checkpoint, load_dataset, load_record, save_checkpoint, save_dataset, save_record, BearingMeta, Checkpoint, DatasetMeta,
    SampleMeta, CHECKPOINT_MAGIC, CONTAINER_VERSION, DATASET_MAGIC, RECORD_MAGIC,
};
pub use pronostia::{load_pronostia_bearing, PronostiaLayout, PRONOSTIA_RATE_HZ, PRONOSTIA_SNAPSHOT_PERIOD_S};
pub use synthetic::{gen_synthetic, SyntheticConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("directory not found: {0}")]
    MissingDirectory(PathBuf),
    #[error("no acceleration files in {0}")]
    NoSnapshots(PathBuf),
    #[error("snapshot {index} is missing from {dir}")]
    MissingSnapshot { dir: PathBuf, index: u64 },
    #[error("{}:{line}: {reason}", file.display())]
    MalformedRow { file: PathBuf, line: usize, reason: String },
    #[error("{} has {got} rows, expected {expected}", file.display())]
    InconsistentSnapshotLength { file: PathBuf, got: usize, expected: usize },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{}: container version {found}, this build reads {expected}", path.display())]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("{}: corrupt container ({reason})", path.display())]
    CorruptContainer { path: PathBuf, reason: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
