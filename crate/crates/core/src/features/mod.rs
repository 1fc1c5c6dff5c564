//! From run-to-failure records to labeled training samples.

mod dataset;
mod fpt;
mod image;

pub use dataset::{build_dataset, featurize_record, preprocess_record, DatasetConfig, Featurized, PreprocessConfig};
pub use fpt::{detect_fpt, detect_fpt_record, healthy_band, kurtosis_series, ChannelPolicy, FptConfig, FptReport};
pub use image::{normalize_min_max, wpd_image, ImageConfig, WpdImage};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{SignalError, SignalVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("record has {len} snapshots, need at least {min}")]
    RecordTooShort { len: usize, min: usize },
    #[error("kurtosis series of length {len} does not extend past a baseline of {baseline}")]
    BaselineTooShort { len: usize, baseline: usize },
    #[error("first prediction time {fpt} out of range for a record of {len} snapshots")]
    FptOutOfRange { fpt: usize, len: usize },
    #[error("no window ends at or after the first prediction time {fpt}")]
    NoPostFptWindows { fpt: usize },
    #[error("no degradation onset detected in bearing {0}")]
    NoOnset(String),
    #[error("snapshot {snapshot}: {source}")]
    Snapshot {
        snapshot: usize,
        #[source]
        source: SignalError,
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub horizontal: SignalVector,
    pub vertical: SignalVector,
}

impl Snapshot {
    pub fn channel(&self, channel: Channel) -> &SignalVector {
        match channel {
            Channel::Horizontal => &self.horizontal,
            Channel::Vertical => &self.vertical,
        }
    }
}

/// A chronological sequence of two-channel snapshots from healthy to failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BearingRecord {
    snapshots: Vec<Snapshot>,
    pub snapshot_period_s: f64,
    pub bearing_id: String,
    pub condition_id: u32,
}

impl BearingRecord {
    pub fn new(
        snapshots: Vec<Snapshot>,
        snapshot_period_s: f64,
        bearing_id: impl Into<String>,
        condition_id: u32,
    ) -> Result<Self, FeatureError> {
        let first = snapshots
            .first()
            .ok_or_else(|| FeatureError::InvalidRecord("no snapshots".into()))?;
        let len = first.horizontal.len();
        let rate = first.horizontal.sample_rate_hz();
        for (i, s) in snapshots.iter().enumerate() {
            for sig in [&s.horizontal, &s.vertical] {
                if sig.len() != len || sig.sample_rate_hz() != rate {
                    return Err(FeatureError::InvalidRecord(format!(
                        "snapshot {i} has {} samples at {} Hz, expected {len} at {rate} Hz",
                        sig.len(),
                        sig.sample_rate_hz()
                    )));
                }
            }
        }
        Ok(Self {
            snapshots,
            snapshot_period_s,
            bearing_id: bearing_id.into(),
            condition_id,
        })
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn samples_per_snapshot(&self) -> usize {
        self.snapshots[0].horizontal.len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.snapshots[0].horizontal.sample_rate_hz()
    }

    /// Concatenated samples of the given snapshots on one channel.
    pub fn concat(&self, window: &Window, channel: Channel) -> Vec<f64> {
        let mut out = Vec::with_capacity(window.size * self.samples_per_snapshot());
        for i in window.snapshot_indices() {
            out.extend_from_slice(self.snapshots[i].channel(channel).samples());
        }
        out
    }
}

/// `size` consecutive snapshots starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub size: usize,
}

impl Window {
    pub fn snapshot_indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.size
    }

    pub fn last(&self) -> usize {
        self.start + self.size - 1
    }
}

/// Windows at starts `0, stride, 2*stride, ...`; a trailing remainder is dropped.
pub fn sliding_windows(record_len: usize, size: usize, stride: usize) -> Result<Vec<Window>, FeatureError> {
    if size == 0 || stride == 0 {
        return Err(FeatureError::InvalidConfig("window size and stride must be positive".into()));
    }
    if record_len < size {
        return Err(FeatureError::RecordTooShort { len: record_len, min: size });
    }
    Ok((0..=(record_len - size) / stride)
        .map(|k| Window { start: k * stride, size })
        .collect())
}

/// Per-snapshot RUL labels: 1 up to `fpt`, then linear down to exactly 0 at the last snapshot.
pub fn assign_labels(record_len: usize, fpt: usize) -> Result<Vec<f64>, FeatureError> {
    if record_len < 2 || fpt >= record_len - 1 {
        return Err(FeatureError::FptOutOfRange { fpt, len: record_len });
    }
    let span = (record_len - 1 - fpt) as f64;
    Ok((0..record_len)
        .map(|i| if i <= fpt { 1.0 } else { 1.0 - (i - fpt) as f64 / span })
        .collect())
}

/// Paired channel images for one window with its normalized RUL label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub hor: WpdImage,
    pub ver: WpdImage,
    pub label: f32,
    pub bearing_id: String,
}
