//! Two-stream convolutional stems feeding a hierarchical shifted-window
//! transformer with a small regression head.
//!
//! Shapes (full preset): two `64x64` images -> stems `32x32x32` each ->
//! concatenated `64` channels -> per-token linear embedding to `C` on a `32x32`
//! grid -> four stages (`32, 16, 8, 4` grid; `C, 2C, 4C, 8C` wide) with patch
//! merging in between -> layer norm -> token mean -> FC/ReLU/dropout twice ->
//! scalar. The output is not clamped.

mod attention;
mod config;
mod params;

pub use attention::{relative_position_index, window_attention, AttentionOutput, AttentionWeights, WindowPlan};
pub use config::{ModelConfig, Preset, StageShape};
pub use params::{BoundParams, ModelParams};

use std::sync::Arc;

use thiserror::Error;

use crate::features::LabeledSample;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("token grid side {side} is not divisible by window {window}")]
    IndivisibleGrid { side: usize, window: usize },
    #[error("patch merging needs an even grid, got {0}")]
    OddGrid(usize),
    #[error("parameters do not match configuration: {0}")]
    ConfigMismatch(String),
    #[error("input image is {got}x{got}, model expects {want}x{want}")]
    InputShape { got: usize, want: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Whether dropout is active and how its masks are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardMode {
    pub training: bool,
    pub seed: u64,
}

impl ForwardMode {
    pub const EVAL: ForwardMode = ForwardMode { training: false, seed: 0 };

    pub fn train(seed: u64) -> Self {
        Self { training: true, seed }
    }
}

/// Gather that concatenates each 2x2 neighborhood of an `s x s` grid into one token.
fn merge_index(side: usize, dim: usize) -> Arc<[usize]> {
    let half = side / 2;
    let mut idx = Vec::with_capacity(side * side * dim);
    for i in 0..half {
        for j in 0..half {
            for (dy, dx) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let tok = (2 * i + dy) * side + 2 * j + dx;
                idx.extend((0..dim).map(|c| tok * dim + c));
            }
        }
    }
    idx.into()
}

/// A validated architecture with its precomputed attention plans.
#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    /// `plans[stage][block]`; odd blocks use the shifted partition.
    plans: Vec<Vec<WindowPlan>>,
    merges: Vec<Arc<[usize]>>,
    tokens_index: Arc<[usize]>,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let stages = cfg.stages();
        let plans = stages
            .iter()
            .map(|s| {
                (0..s.depth)
                    .map(|b| WindowPlan::new(s.side, s.window, b % 2 == 1, s.heads, s.dim))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let merges = stages[..3].iter().map(|s| merge_index(s.side, s.dim)).collect();
        // [channels, side*side] -> [side*side, channels]
        let (ch, l) = (2 * cfg.conv_channels, cfg.grid_side().pow(2));
        let tokens_index = (0..l).flat_map(|t| (0..ch).map(move |c| c * l + t)).collect();
        Ok(Self {
            cfg,
            plans,
            merges,
            tokens_index,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn init_params(&self, seed: u64) -> ModelParams {
        ModelParams::init(&self.cfg, seed)
    }

    pub fn plan(&self, stage: usize, block: usize) -> &WindowPlan {
        &self.plans[stage][block]
    }

    fn image<'t>(&self, tape: &'t Tape, pixels: &[f32], side: usize) -> Result<Var<'t>, ModelError> {
        if side != self.cfg.image_side || pixels.len() != side * side {
            return Err(ModelError::InputShape {
                got: side,
                want: self.cfg.image_side,
            });
        }
        let data = pixels.iter().map(|&p| p as f64).collect();
        Ok(tape.constant(Tensor::new(vec![1, 1, side, side], data)?))
    }

    /// 3x3 convolution (pad 1), ReLU, 2x2 max pooling.
    pub fn conv_stem<'t>(&self, p: &BoundParams<'t, '_>, stream: &str, img: Var<'t>) -> Result<Var<'t>, ModelError> {
        let w = p.get(&format!("stem.{stream}.weight"))?;
        let b = p.get(&format!("stem.{stream}.bias"))?;
        Ok(img.conv2d(w, b, 1)?.relu().maxpool2d(2)?)
    }

    /// Channel concatenation of both stems, then per-token linear embedding and layer norm.
    pub fn fuse<'t>(&self, p: &BoundParams<'t, '_>, hor: Var<'t>, ver: Var<'t>) -> Result<Var<'t>, ModelError> {
        if hor.shape() != ver.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "fuse",
                lhs: hor.shape(),
                rhs: ver.shape(),
            }
            .into());
        }
        let fused = Var::concat(&[hor, ver], 1)?;
        let (ch, l) = (2 * self.cfg.conv_channels, self.cfg.grid_side().pow(2));
        let tokens = fused.gather(self.tokens_index.clone(), &[l, ch])?;
        let x = tokens.matmul(p.get("embed.weight")?)?.add_bias(p.get("embed.bias")?)?;
        Ok(x.layer_norm(p.get("embed.norm.gamma")?, p.get("embed.norm.beta")?)?)
    }

    fn attention_weights<'t>(&self, p: &BoundParams<'t, '_>, prefix: &str) -> Result<AttentionWeights<'t>, ModelError> {
        Ok(AttentionWeights {
            qkv_weight: p.get(&format!("{prefix}.attn.qkv.weight"))?,
            qkv_bias: p.get(&format!("{prefix}.attn.qkv.bias"))?,
            rel_bias: p.get(&format!("{prefix}.attn.rel_bias"))?,
            proj_weight: p.get(&format!("{prefix}.attn.proj.weight"))?,
            proj_bias: p.get(&format!("{prefix}.attn.proj.bias"))?,
        })
    }

    /// Pre-norm transformer block: window attention and a GELU MLP, each with a residual.
    pub fn block<'t>(
        &self,
        p: &BoundParams<'t, '_>,
        stage: usize,
        index: usize,
        x: Var<'t>,
    ) -> Result<AttentionOutput<'t>, ModelError> {
        let prefix = format!("stages.{stage}.blocks.{index}");
        let plan = &self.plans[stage][index];
        let h = x.layer_norm(p.get(&format!("{prefix}.norm1.gamma"))?, p.get(&format!("{prefix}.norm1.beta"))?)?;
        let att = window_attention(h, &self.attention_weights(p, &prefix)?, plan)?;
        let x = x.add(att.tokens)?;
        let h = x.layer_norm(p.get(&format!("{prefix}.norm2.gamma"))?, p.get(&format!("{prefix}.norm2.beta"))?)?;
        let h = h
            .matmul(p.get(&format!("{prefix}.mlp.fc1.weight"))?)?
            .add_bias(p.get(&format!("{prefix}.mlp.fc1.bias"))?)?
            .gelu()
            .matmul(p.get(&format!("{prefix}.mlp.fc2.weight"))?)?
            .add_bias(p.get(&format!("{prefix}.mlp.fc2.bias"))?)?;
        Ok(AttentionOutput {
            tokens: x.add(h)?,
            attention: att.attention,
        })
    }

    /// `s x s x C` tokens -> `s/2 x s/2 x 2C`.
    pub fn patch_merging<'t>(&self, p: &BoundParams<'t, '_>, stage: usize, x: Var<'t>) -> Result<Var<'t>, ModelError> {
        let s = self.cfg.stages()[stage];
        if s.side % 2 != 0 {
            return Err(ModelError::OddGrid(s.side));
        }
        let half = s.side / 2;
        let merged = x.gather(self.merges[stage].clone(), &[half * half, 4 * s.dim])?;
        let prefix = format!("stages.{stage}.merge");
        let normed = merged.layer_norm(
            p.get(&format!("{prefix}.norm.gamma"))?,
            p.get(&format!("{prefix}.norm.beta"))?,
        )?;
        Ok(normed.matmul(p.get(&format!("{prefix}.reduction.weight"))?)?)
    }

    /// Prediction for one pair of images, shape `[1]`.
    pub fn forward_images<'t>(
        &self,
        p: &BoundParams<'t, '_>,
        tape: &'t Tape,
        hor: &[f32],
        ver: &[f32],
        side: usize,
        mode: ForwardMode,
    ) -> Result<Var<'t>, ModelError> {
        let hor = self.conv_stem(p, "hor", self.image(tape, hor, side)?)?;
        let ver = self.conv_stem(p, "ver", self.image(tape, ver, side)?)?;
        let mut x = self.fuse(p, hor, ver)?;
        for stage in 0..4 {
            for b in 0..self.cfg.depths[stage] {
                x = self.block(p, stage, b, x)?.tokens;
            }
            if stage < 3 {
                x = self.patch_merging(p, stage, x)?;
            }
        }
        let pooled = x
            .layer_norm(p.get("norm.gamma")?, p.get("norm.beta")?)?
            .mean_rows()?
            .reshape(&[1, self.cfg.final_dim()])?;
        let drop = self.cfg.dropout_p;
        let h = pooled
            .matmul(p.get("head.fc1.weight")?)?
            .add_bias(p.get("head.fc1.bias")?)?
            .relu()
            .dropout(drop, mode.training, mode.seed.wrapping_mul(2))?;
        let h = h
            .matmul(p.get("head.fc2.weight")?)?
            .add_bias(p.get("head.fc2.bias")?)?
            .relu()
            .dropout(drop, mode.training, mode.seed.wrapping_mul(2).wrapping_add(1))?;
        let y = h.matmul(p.get("head.out.weight")?)?.add_bias(p.get("head.out.bias")?)?;
        Ok(y.reshape(&[1])?)
    }

    pub fn forward<'t>(
        &self,
        p: &BoundParams<'t, '_>,
        tape: &'t Tape,
        sample: &LabeledSample,
        mode: ForwardMode,
    ) -> Result<Var<'t>, ModelError> {
        self.forward_images(p, tape, &sample.hor.pixels, &sample.ver.pixels, sample.hor.side, mode)
    }

    /// Predictions for a batch as one `[B]` node; sample `i` uses dropout seed `mode.seed + i`.
    pub fn forward_batch<'t>(
        &self,
        p: &BoundParams<'t, '_>,
        tape: &'t Tape,
        samples: &[&LabeledSample],
        mode: ForwardMode,
    ) -> Result<Var<'t>, ModelError> {
        let preds = samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let m = ForwardMode {
                    training: mode.training,
                    seed: mode.seed.wrapping_add(i as u64),
                };
                self.forward(p, tape, s, m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Var::concat(&preds, 0)?)
    }

    /// Inference-mode prediction.
    pub fn predict(&self, params: &ModelParams, sample: &LabeledSample) -> Result<f64, ModelError> {
        let tape = Tape::new();
        let bound = params.bind(&tape);
        let y = self.forward(&bound, &tape, sample, ForwardMode::EVAL)?;
        Ok(y.item().expect("scalar prediction"))
    }

    /// Inference over many samples, spread over threads; output order follows input order.
    pub fn predict_all(&self, params: &ModelParams, samples: &[LabeledSample]) -> Result<Vec<f64>, ModelError> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(samples.len());
        let chunk = samples.len().div_ceil(workers);
        let parts: Vec<Result<Vec<f64>, ModelError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = samples
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|s| self.predict(params, s)).collect()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("inference thread panicked")).collect()
        });
        let mut out = Vec::with_capacity(samples.len());
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }
}
