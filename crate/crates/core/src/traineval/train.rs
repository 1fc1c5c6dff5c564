use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::LabeledSample;
use crate::model::{ForwardMode, Model, ModelConfig, ModelParams};
use crate::tensor::{Tape, Tensor};

use super::metrics::mae;
use super::{adam_step, AdamState, PredictionBatch, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    #[default]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Weight of the late-prediction hinge. Ignored for `Mse`.
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { kind: LossKind::Custom, lambda: 1.0 }
    }
}

impl LossConfig {
    pub fn mse() -> Self {
        Self { kind: LossKind::Mse, ..Self::default() }
    }

    pub fn custom(lambda: f64) -> Self {
        Self { kind: LossKind::Custom, lambda }
    }

    fn effective_lambda(&self) -> f64 {
        match self.kind {
            LossKind::Mse => 0.0,
            LossKind::Custom => self.lambda,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TrainError::InvalidConfig(format!("lambda must be a finite non-negative number, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl TrainConfig {
    pub fn full() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 16,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }

    /// Short schedule for the small model on synthetic data.
    pub fn desk() -> Self {
        Self { learning_rate: 2e-4, batch_size: 4, epochs: 30, ..Self::full() }
    }

    pub fn validate(&self, dataset_len: usize) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.batch_size > dataset_len {
            return bad(format!("batch size {} exceeds dataset size {dataset_len}", self.batch_size));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_mae\n");
        for r in &self.epochs {
            let val = r.val_mae.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, val));
        }
        out
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.train_loss)
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.train_loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: History,
    pub steps: u64,
}

/// Runs the model over `samples` in eval mode and pairs predictions with labels.
pub fn evaluate(model: &Model, params: &ModelParams, samples: &[LabeledSample]) -> Result<PredictionBatch, TrainError> {
    let preds = model.predict_all(params, samples)?;
    let targets = samples.iter().map(|s| f64::from(s.label)).collect();
    PredictionBatch::new(preds, targets)
}

pub fn train(
    dataset: &[LabeledSample],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    validation: Option<&[LabeledSample]>,
) -> Result<TrainOutcome, TrainError> {
    train_with(dataset, model_cfg, train_cfg, loss_cfg, validation, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
///
/// The output bias starts at the mean training label instead of zero.
pub fn train_with(
    dataset: &[LabeledSample],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    validation: Option<&[LabeledSample]>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    train_cfg.validate(dataset.len())?;
    loss_cfg.validate()?;
    let model = Model::new(model_cfg.clone())?;
    let mut params = model.init_params(train_cfg.seed);
    let label_mean = dataset.iter().map(|s| f64::from(s.label)).sum::<f64>() / dataset.len() as f64;
    if let Some(bias) = params.get_mut("head.out.bias") {
        bias.data_mut().fill(label_mean);
    }
    let mut state = AdamState::zeros_like(params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    rng.set_stream(1);
    let lambda = loss_cfg.effective_lambda();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = History::default();
    let mut step = 0u64;
    for epoch in 1..=train_cfg.epochs {
        if train_cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(train_cfg.batch_size).enumerate() {
            let base_seed = dropout_seed(train_cfg.seed, epoch, b);
            let per_sample = batch_gradients(&model, &params, dataset, idx, base_seed, lambda)?;
            let n = idx.len() as f64;
            let mut grads: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
            let mut batch_loss = 0.0;
            for (loss, g) in per_sample {
                batch_loss += loss;
                for (acc, g) in grads.iter_mut().zip(g) {
                    for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += v / n;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::DivergedLoss { epoch, batch: b });
            }
            loss_sum += batch_loss;
            step += 1;
            adam_step(params.tensors_mut(), &grads, &mut state, train_cfg, step)?;
        }
        let val_mae = match validation {
            Some(v) if !v.is_empty() => Some(mae(&evaluate(&model, &params, v)?)),
            _ => None,
        };
        let record = EpochRecord { epoch, train_loss: loss_sum / dataset.len() as f64, val_mae };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok(TrainOutcome { params, history, steps: step })
}

fn dropout_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((epoch as u64) << 32) ^ ((batch as u64) << 16)
}

/// Per-sample loss and unscaled gradients, in the order of `idx`. The work is
/// spread over threads but each sample is computed independently, so results
/// do not depend on the thread count.
fn batch_gradients(
    model: &Model,
    params: &ModelParams,
    dataset: &[LabeledSample],
    idx: &[usize],
    base_seed: u64,
    lambda: f64,
) -> Result<Vec<(f64, Vec<Tensor>)>, TrainError> {
    let one = |pos: usize| -> Result<(f64, Vec<Tensor>), TrainError> {
        let sample = &dataset[idx[pos]];
        let tape = Tape::new();
        let p = params.bind(&tape);
        let mode = ForwardMode::train(base_seed.wrapping_add(pos as u64));
        let y = model.forward(&p, &tape, sample, mode)?;
        let target = tape.constant(Tensor::new(vec![1], vec![f64::from(sample.label)]).expect("one element"));
        let diff = y.sub(target).map_err(crate::model::ModelError::from)?;
        let mut loss = diff.mul(diff).map_err(crate::model::ModelError::from)?;
        if lambda > 0.0 {
            loss = loss.add(diff.relu().scale(lambda)).map_err(crate::model::ModelError::from)?;
        }
        let loss = loss.sum();
        let value = loss.item().expect("scalar loss");
        let grads = tape.backward(loss).map_err(crate::model::ModelError::from)?;
        Ok((value, p.vars.iter().map(|&v| grads.get_or_zeros(v)).collect()))
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(idx.len());
    if workers <= 1 {
        return (0..idx.len()).map(one).collect();
    }
    let chunk = idx.len().div_ceil(workers);
    let positions: Vec<usize> = (0..idx.len()).collect();
    let parts: Vec<Result<Vec<_>, TrainError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = positions
            .chunks(chunk)
            .map(|part| {
                let one = &one;
                scope.spawn(move || part.iter().map(|&pos| one(pos)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(idx.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Channel, Window, WpdImage};
    use rand::Rng;

    fn toy_dataset(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i as f32 / (n - 1) as f32;
                let img = |channel, rng: &mut ChaCha8Rng| WpdImage {
                    side: 32,
                    pixels: (0..1024).map(|_| (label * 0.5 + rng.random_range(0.0f32..0.5)).min(1.0)).collect(),
                    channel,
                    source_window: Window { start: i, size: 10 },
                };
                LabeledSample { hor: img(Channel::Horizontal, &mut rng), ver: img(Channel::Vertical, &mut rng), label, bearing_id: "t".into() }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = toy_dataset(4, 1);
        let cfg = TrainConfig { epochs: 0, batch_size: 2, seed: 9, ..TrainConfig::desk() };
        let out = train(&data, &ModelConfig::desk(), &cfg, &LossConfig::default(), None).unwrap();
        let mut want = ModelParams::init(&ModelConfig::desk(), 9);
        let mean = data.iter().map(|s| f64::from(s.label)).sum::<f64>() / 4.0;
        want.get_mut("head.out.bias").unwrap().data_mut()[0] = mean;
        assert_eq!(out.params, want);
        assert!(out.history.epochs.is_empty());
    }

    #[test]
    fn seeded_training_is_reproducible_and_descends() {
        let data = toy_dataset(8, 2);
        let cfg = TrainConfig { epochs: 4, batch_size: 4, seed: 3, ..TrainConfig::desk() };
        let a = train(&data, &ModelConfig::desk(), &cfg, &LossConfig::default(), Some(&data[..2])).unwrap();
        let b = train(&data, &ModelConfig::desk(), &cfg, &LossConfig::default(), Some(&data[..2])).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        assert_eq!(a.steps, 8);
        assert!(a.history.last_loss().unwrap() < a.history.first_loss().unwrap());
        assert!(a.history.epochs.iter().all(|r| r.val_mae.is_some()));
        assert!(a.history.to_csv().starts_with("epoch,loss,val_mae\n1,"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = toy_dataset(4, 1);
        let cfg = TrainConfig { batch_size: 16, ..TrainConfig::desk() };
        assert!(matches!(train(&[], &ModelConfig::desk(), &cfg, &LossConfig::default(), None), Err(TrainError::EmptyDataset)));
        assert!(matches!(train(&data, &ModelConfig::desk(), &cfg, &LossConfig::default(), None), Err(TrainError::InvalidConfig(_))));
        let small = TrainConfig { batch_size: 2, ..cfg };
        assert!(matches!(train(&data, &ModelConfig::desk(), &small, &LossConfig::custom(-1.0), None), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy_dataset(4, 1);
        let cfg = TrainConfig { learning_rate: 1e300, epochs: 3, batch_size: 2, ..TrainConfig::desk() };
        let err = train(&data, &ModelConfig::desk(), &cfg, &LossConfig::default(), None).unwrap_err();
        assert!(matches!(err, TrainError::DivergedLoss { .. }), "{err}");
    }
}
