use serde::{Deserialize, Serialize};

use super::TrainError;

/// Predictions paired with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch {
    preds: Vec<f64>,
    targets: Vec<f64>,
}

impl PredictionBatch {
    pub fn new(preds: Vec<f64>, targets: Vec<f64>) -> Result<Self, TrainError> {
        if preds.len() != targets.len() {
            return Err(TrainError::LengthMismatch { preds: preds.len(), targets: targets.len() });
        }
        if preds.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        if let Some((index, &value)) = targets.iter().enumerate().find(|(_, t)| !(0.0..=1.0).contains(*t)) {
            return Err(TrainError::TargetOutOfRange { index, value });
        }
        Ok(Self { preds, targets })
    }

    pub fn preds(&self) -> &[f64] {
        &self.preds
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    /// `pred - target` per sample; positive means late.
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.preds.iter().zip(&self.targets).map(|(p, t)| p - t)
    }
}

/// Mean of squared error plus `lambda` times the late hinge.
pub fn custom_loss(batch: &PredictionBatch, lambda: f64) -> f64 {
    let n = batch.len() as f64;
    batch.errors().map(|e| e * e + lambda * e.max(0.0)).sum::<f64>() / n
}

/// d loss / d pred. The hinge contributes nothing at an exact tie.
pub fn custom_loss_grad(batch: &PredictionBatch, lambda: f64) -> Vec<f64> {
    let n = batch.len() as f64;
    batch
        .errors()
        .map(|e| (2.0 * e + if e > 0.0 { lambda } else { 0.0 }) / n)
        .collect()
}

pub fn mse_loss(batch: &PredictionBatch) -> f64 {
    batch.errors().map(|e| e * e).sum::<f64>() / batch.len() as f64
}

pub fn mae(batch: &PredictionBatch) -> f64 {
    batch.errors().map(f64::abs).sum::<f64>() / batch.len() as f64
}

/// One sample's contribution to the asymmetric score.
pub fn score_term(error: f64) -> f64 {
    if error < 0.0 {
        (-error / 15.0).exp() - 1.0
    } else {
        (error / 5.0).exp() - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    #[default]
    Mean,
}

pub fn score(batch: &PredictionBatch, aggregation: Aggregation) -> f64 {
    let total: f64 = batch.errors().map(score_term).sum();
    match aggregation {
        Aggregation::Sum => total,
        Aggregation::Mean => total / batch.len() as f64,
    }
}

/// Share of samples predicted strictly later than the truth.
pub fn late_fraction(batch: &PredictionBatch) -> f64 {
    batch.errors().filter(|&e| e > 0.0).count() as f64 / batch.len() as f64
}

/// Summary written by evaluation commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    pub score_sum: f64,
    pub score_mean: f64,
    pub late_fraction: f64,
}

impl Metrics {
    pub fn of(batch: &PredictionBatch) -> Self {
        Self {
            n: batch.len(),
            mae: mae(batch),
            score_sum: score(batch, Aggregation::Sum),
            score_mean: score(batch, Aggregation::Mean),
            late_fraction: late_fraction(batch),
        }
    }
}
