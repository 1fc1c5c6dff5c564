//! Desk-scale experiment drivers on synthetic bearings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{gen_synthetic, BearingMeta, DataError, SyntheticConfig};
use crate::features::{featurize_record, DatasetConfig, FeatureError, FptConfig, ImageConfig, LabeledSample};
use crate::model::{Model, ModelConfig, ModelError};
use crate::traineval::{evaluate, mae, train, LossConfig, Metrics, PredictionBatch, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Synthetic bearings split into training and held-out sets by generator seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSplitConfig {
    /// Template for every bearing; its `seed` is replaced per bearing.
    pub synth: SyntheticConfig,
    pub train_seeds: Vec<u64>,
    pub test_seeds: Vec<u64>,
    pub dataset: DatasetConfig,
}

impl Default for SyntheticSplitConfig {
    fn default() -> Self {
        Self {
            synth: SyntheticConfig {
                n_snapshots: 200,
                samples_per_snapshot: 1024,
                fault_onset_index: 40,
                fault_growth_rate: 0.1,
                impulse_rate_hz: 200.0,
                resonance_hz: 5000.0,
                decay_s: 1e-3,
                ..SyntheticConfig::default()
            },
            train_seeds: vec![101, 102, 103],
            test_seeds: vec![201],
            dataset: DatasetConfig { image: ImageConfig { level: 3, side: 32 }, ..DatasetConfig::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSplit {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub train_bearings: Vec<BearingMeta>,
    pub test_bearings: Vec<BearingMeta>,
}

/// Generates and featurizes one synthetic bearing per seed.
pub fn synthetic_bearings(
    template: &SyntheticConfig,
    seeds: &[u64],
    dataset: &DatasetConfig,
) -> Result<(Vec<LabeledSample>, Vec<BearingMeta>), ExperimentError> {
    let mut samples = Vec::new();
    let mut meta = Vec::new();
    for &seed in seeds {
        let record = gen_synthetic(&SyntheticConfig { seed, ..template.clone() })?;
        let out = featurize_record(&record, &FptConfig::for_record_len(record.len()), dataset)?;
        meta.push(BearingMeta { bearing_id: record.bearing_id.clone(), fpt: Some(out.fpt) });
        samples.extend(out.samples);
    }
    Ok((samples, meta))
}

pub fn build_split(cfg: &SyntheticSplitConfig) -> Result<SyntheticSplit, ExperimentError> {
    let (train, train_bearings) = synthetic_bearings(&cfg.synth, &cfg.train_seeds, &cfg.dataset)?;
    let (test, test_bearings) = synthetic_bearings(&cfg.synth, &cfg.test_seeds, &cfg.dataset)?;
    Ok(SyntheticSplit { train, test, train_bearings, test_bearings })
}

/// Held-out MAE of always predicting the mean training label.
pub fn mean_baseline_mae(train: &[LabeledSample], test: &[LabeledSample]) -> Result<f64, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mean = train.iter().map(|s| f64::from(s.label)).sum::<f64>() / train.len() as f64;
    let targets: Vec<f64> = test.iter().map(|s| f64::from(s.label)).collect();
    Ok(mae(&PredictionBatch::new(vec![mean; targets.len()], targets)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossComparison {
    pub lambda: f64,
    pub mse: Metrics,
    pub custom: Metrics,
    pub delta_mae: f64,
    pub delta_score_mean: f64,
    pub delta_late_fraction: f64,
}

/// Trains the same model twice from identical seeds and data, once per loss,
/// and reports held-out metrics. Deltas are custom minus MSE.
pub fn compare_losses(
    split: &SyntheticSplit,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    lambda: f64,
) -> Result<LossComparison, ExperimentError> {
    let model = Model::new(model_cfg.clone())?;
    let run = |loss: LossConfig| -> Result<Metrics, ExperimentError> {
        let out = train(&split.train, model_cfg, train_cfg, &loss, None)?;
        Ok(Metrics::of(&evaluate(&model, &out.params, &split.test)?))
    };
    let mse = run(LossConfig::mse())?;
    let custom = run(LossConfig::custom(lambda))?;
    Ok(LossComparison {
        lambda,
        delta_mae: custom.mae - mse.mae,
        delta_score_mean: custom.score_mean - mse.score_mean,
        delta_late_fraction: custom.late_fraction - mse.late_fraction,
        mse,
        custom,
    })
}
