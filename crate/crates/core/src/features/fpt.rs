use serde::{Deserialize, Serialize};

use super::{BearingRecord, Channel, FeatureError};
use crate::signal::kurtosis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelPolicy {
    Horizontal,
    Vertical,
    /// An index counts as exceeding when either channel leaves its own band.
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptConfig {
    /// Leading snapshots that define the healthy reference band.
    pub baseline_count: usize,
    pub consecutive_required: usize,
    pub sigma_multiplier: f64,
    pub channel_policy: ChannelPolicy,
}

impl FptConfig {
    /// Baseline of `min(40, 20%)` of the record, never below 4.
    pub fn for_record_len(record_len: usize) -> Self {
        Self {
            baseline_count: (record_len / 5).min(40).max(4),
            consecutive_required: 3,
            sigma_multiplier: 3.0,
            channel_policy: ChannelPolicy::Horizontal,
        }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if self.baseline_count < 4 {
            return Err(FeatureError::InvalidConfig("baseline_count must be at least 4".into()));
        }
        if self.consecutive_required == 0 {
            return Err(FeatureError::InvalidConfig("consecutive_required must be at least 1".into()));
        }
        if !(self.sigma_multiplier >= 0.0) {
            return Err(FeatureError::InvalidConfig("sigma_multiplier must be non-negative".into()));
        }
        Ok(())
    }
}

/// One kurtosis value per snapshot on `channel`.
pub fn kurtosis_series(record: &BearingRecord, channel: Channel) -> Result<Vec<f64>, FeatureError> {
    record
        .snapshots()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            kurtosis(s.channel(channel).samples())
                .map_err(|source| FeatureError::Snapshot { snapshot: i, source })
        })
        .collect()
}

/// Mean and sample standard deviation of the baseline segment.
pub fn healthy_band(k: &[f64], cfg: &FptConfig) -> Result<(f64, f64), FeatureError> {
    cfg.validate()?;
    if k.len() <= cfg.baseline_count {
        return Err(FeatureError::BaselineTooShort {
            len: k.len(),
            baseline: cfg.baseline_count,
        });
    }
    let base = &k[..cfg.baseline_count];
    let n = base.len() as f64;
    let mu = base.iter().sum::<f64>() / n;
    let var = base.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mu, var.sqrt()))
}

fn exceedances(k: &[f64], cfg: &FptConfig) -> Result<Vec<bool>, FeatureError> {
    let (mu, sigma) = healthy_band(k, cfg)?;
    let half = cfg.sigma_multiplier * sigma;
    Ok(k.iter().map(|&v| v < mu - half || v > mu + half).collect())
}

fn first_run(exceed: &[bool], from: usize, run: usize) -> Option<usize> {
    let mut streak = 0;
    for (i, &e) in exceed.iter().enumerate().skip(from) {
        streak = if e { streak + 1 } else { 0 };
        if streak == run {
            return Some(i + 1 - run);
        }
    }
    None
}

/// First index at or after the baseline where `consecutive_required` values in
/// a row fall outside `mu +/- sigma_multiplier * sigma`; the returned index is
/// the start of that run.
pub fn detect_fpt(k: &[f64], cfg: &FptConfig) -> Result<Option<usize>, FeatureError> {
    let exceed = exceedances(k, cfg)?;
    Ok(first_run(&exceed, cfg.baseline_count, cfg.consecutive_required))
}

/// Outcome of onset detection on a whole record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptReport {
    pub fpt: Option<usize>,
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
    pub band_horizontal: (f64, f64),
    pub band_vertical: (f64, f64),
    pub config: FptConfig,
}

pub fn detect_fpt_record(record: &BearingRecord, cfg: &FptConfig) -> Result<FptReport, FeatureError> {
    let horizontal = kurtosis_series(record, Channel::Horizontal)?;
    let vertical = kurtosis_series(record, Channel::Vertical)?;
    let band_horizontal = healthy_band(&horizontal, cfg)?;
    let band_vertical = healthy_band(&vertical, cfg)?;
    let fpt = match cfg.channel_policy {
        ChannelPolicy::Horizontal => detect_fpt(&horizontal, cfg)?,
        ChannelPolicy::Vertical => detect_fpt(&vertical, cfg)?,
        ChannelPolicy::Either => {
            let h = exceedances(&horizontal, cfg)?;
            let v = exceedances(&vertical, cfg)?;
            let either: Vec<bool> = h.iter().zip(&v).map(|(a, b)| *a || *b).collect();
            first_run(&either, cfg.baseline_count, cfg.consecutive_required)
        }
    };
    Ok(FptReport {
        fpt,
        horizontal,
        vertical,
        band_horizontal,
        band_vertical,
        config: cfg.clone(),
    })
}
