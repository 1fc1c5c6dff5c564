use serde::{Deserialize, Serialize};

use super::{
    assign_labels, detect_fpt_record, sliding_windows, wpd_image, BearingRecord, Channel,
    FeatureError, FptConfig, FptReport, ImageConfig, LabeledSample, Snapshot, Window,
};
use crate::signal::{daubechies, savgol_filter, savgol_kernel, wavelet_denoise, FilterBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub wavelet_order: usize,
    pub denoise_levels: usize,
    pub savgol_window: usize,
    pub savgol_order: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            wavelet_order: 5,
            denoise_levels: 2,
            savgol_window: 5,
            savgol_order: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub window_size: usize,
    pub stride: usize,
    pub image: ImageConfig,
    pub preprocess: PreprocessConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            window_size: 10,
            stride: 5,
            image: ImageConfig::default(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub(crate) fn filter_bank(&self) -> Result<FilterBank, FeatureError> {
        Ok(daubechies(self.preprocess.wavelet_order)?)
    }
}

/// Wavelet denoising followed by Savitzky-Golay smoothing, per snapshot and channel.
pub fn preprocess_record(record: &BearingRecord, cfg: &PreprocessConfig) -> Result<BearingRecord, FeatureError> {
    let fb = daubechies(cfg.wavelet_order)?;
    let kernel = savgol_kernel(cfg.savgol_window, cfg.savgol_order)?;
    let clean = |s: &crate::signal::SignalVector, i: usize| {
        wavelet_denoise(s, cfg.denoise_levels, &fb)
            .and_then(|d| savgol_filter(&d, &kernel))
            .map_err(|source| FeatureError::Snapshot { snapshot: i, source })
    };
    let snapshots = record
        .snapshots()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Snapshot {
                horizontal: clean(&s.horizontal, i)?,
                vertical: clean(&s.vertical, i)?,
            })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    BearingRecord::new(
        snapshots,
        record.snapshot_period_s,
        record.bearing_id.clone(),
        record.condition_id,
    )
}

/// Labeled samples for every window whose last snapshot is at or after `fpt`.
///
/// `record` is expected to be preprocessed already. Windows are featurized on
/// worker threads; the output is ordered by window start.
pub fn build_dataset(
    record: &BearingRecord,
    fpt: usize,
    cfg: &DatasetConfig,
) -> Result<Vec<LabeledSample>, FeatureError> {
    let labels = assign_labels(record.len(), fpt)?;
    let windows: Vec<Window> = sliding_windows(record.len(), cfg.window_size, cfg.stride)?
        .into_iter()
        .filter(|w| w.last() >= fpt)
        .collect();
    if windows.is_empty() {
        return Err(FeatureError::NoPostFptWindows { fpt });
    }
    let fb = cfg.filter_bank()?;
    let make = |w: &Window| -> Result<LabeledSample, FeatureError> {
        let hor = wpd_image(&record.concat(w, Channel::Horizontal), &cfg.image, &fb, Channel::Horizontal, *w)?;
        let ver = wpd_image(&record.concat(w, Channel::Vertical), &cfg.image, &fb, Channel::Vertical, *w)?;
        Ok(LabeledSample {
            hor,
            ver,
            label: labels[w.last()] as f32,
            bearing_id: record.bearing_id.clone(),
        })
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(windows.len());
    let chunk = windows.len().div_ceil(workers);
    let parts: Vec<Result<Vec<LabeledSample>, FeatureError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = windows
            .chunks(chunk)
            .map(|ws| scope.spawn(move || ws.iter().map(make).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("featurizer thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(windows.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Featurized {
    pub report: FptReport,
    pub fpt: usize,
    pub samples: Vec<LabeledSample>,
}

/// Onset detection on the raw record, then denoise, window and featurize.
///
/// A record without a detectable onset is rejected with [`FeatureError::NoOnset`].
pub fn featurize_record(
    record: &BearingRecord,
    fpt_cfg: &FptConfig,
    cfg: &DatasetConfig,
) -> Result<Featurized, FeatureError> {
    let report = detect_fpt_record(record, fpt_cfg)?;
    let fpt = report
        .fpt
        .ok_or_else(|| FeatureError::NoOnset(record.bearing_id.clone()))?;
    let clean = preprocess_record(record, &cfg.preprocess)?;
    let samples = build_dataset(&clean, fpt, cfg)?;
    Ok(Featurized { report, fpt, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SignalVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(n: usize, samples: usize) -> BearingRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sig = || SignalVector::new((0..samples).map(|_| rng.random_range(-1.0..1.0)).collect(), 25_600.0).unwrap();
        let snaps = (0..n)
            .map(|_| Snapshot {
                horizontal: sig(),
                vertical: sig(),
            })
            .collect();
        BearingRecord::new(snaps, 10.0, "test", 1).unwrap()
    }

    fn small_cfg() -> DatasetConfig {
        DatasetConfig {
            image: ImageConfig { level: 3, side: 16 },
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn retained_window_count() {
        let rec = record(100, 32);
        let samples = build_dataset(&rec, 50, &small_cfg()).unwrap();
        // starts 45, 50, ..., 90
        assert_eq!(samples.len(), 10);
        assert_eq!(samples[0].hor.source_window.start, 45);
        assert_eq!(samples.last().unwrap().label, 0.0);
        for pair in samples.windows(2) {
            assert!(pair[1].label <= pair[0].label);
            assert!(pair[1].hor.source_window.start > pair[0].hor.source_window.start);
        }
        assert_eq!(build_dataset(&rec, 0, &small_cfg()).unwrap().len(), 19);
    }

    #[test]
    fn labels_come_from_last_snapshot() {
        let rec = record(40, 32);
        let labels = assign_labels(40, 10).unwrap();
        for s in build_dataset(&rec, 10, &small_cfg()).unwrap() {
            assert_eq!(s.label, labels[s.hor.source_window.last()] as f32);
            assert_eq!(s.ver.channel, Channel::Vertical);
        }
    }

    #[test]
    fn preprocessing_keeps_shape() {
        let rec = record(3, 64);
        let clean = preprocess_record(&rec, &PreprocessConfig::default()).unwrap();
        assert_eq!(clean.len(), 3);
        assert_eq!(clean.samples_per_snapshot(), 64);
    }

    #[test]
    fn flat_record_has_no_onset() {
        let rec = record(60, 256);
        let err = featurize_record(&rec, &FptConfig::for_record_len(60), &small_cfg());
        // uniform noise stays inside its band almost surely; either way no panic
        if let Err(e) = err {
            assert!(matches!(e, FeatureError::NoOnset(_)));
        }
    }
}
