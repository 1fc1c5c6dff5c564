use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Zeros,
    Ones,
    /// Normal with this std, resampled outside two standard deviations.
    TruncNormal(f64),
}

/// Names, shapes and initializers of every learnable tensor, in a fixed order.
fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut out = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| out.push((name, shape, init));
    let c = cfg.conv_channels;
    let conv_std = (2.0 / 9.0f64).sqrt();
    for stem in ["hor", "ver"] {
        add(format!("stem.{stem}.weight"), vec![c, 1, 3, 3], Init::TruncNormal(conv_std));
        add(format!("stem.{stem}.bias"), vec![c], Init::Zeros);
    }
    let cb = cfg.embed_dim_base;
    add("embed.weight".into(), vec![2 * c, cb], Init::TruncNormal(0.02));
    add("embed.bias".into(), vec![cb], Init::Zeros);
    add("embed.norm.gamma".into(), vec![cb], Init::Ones);
    add("embed.norm.beta".into(), vec![cb], Init::Zeros);
    for (si, s) in cfg.stages().iter().enumerate() {
        let d = s.dim;
        for b in 0..s.depth {
            let p = format!("stages.{si}.blocks.{b}");
            add(format!("{p}.norm1.gamma"), vec![d], Init::Ones);
            add(format!("{p}.norm1.beta"), vec![d], Init::Zeros);
            add(format!("{p}.attn.qkv.weight"), vec![d, 3 * d], Init::TruncNormal(0.02));
            add(format!("{p}.attn.qkv.bias"), vec![3 * d], Init::Zeros);
            add(
                format!("{p}.attn.rel_bias"),
                vec![(2 * s.window - 1).pow(2), s.heads],
                Init::TruncNormal(0.02),
            );
            add(format!("{p}.attn.proj.weight"), vec![d, d], Init::TruncNormal(0.02));
            add(format!("{p}.attn.proj.bias"), vec![d], Init::Zeros);
            add(format!("{p}.norm2.gamma"), vec![d], Init::Ones);
            add(format!("{p}.norm2.beta"), vec![d], Init::Zeros);
            add(format!("{p}.mlp.fc1.weight"), vec![d, s.mlp_hidden], Init::TruncNormal(0.02));
            add(format!("{p}.mlp.fc1.bias"), vec![s.mlp_hidden], Init::Zeros);
            add(format!("{p}.mlp.fc2.weight"), vec![s.mlp_hidden, d], Init::TruncNormal(0.02));
            add(format!("{p}.mlp.fc2.bias"), vec![d], Init::Zeros);
        }
        if si < 3 {
            add(format!("stages.{si}.merge.norm.gamma"), vec![4 * d], Init::Ones);
            add(format!("stages.{si}.merge.norm.beta"), vec![4 * d], Init::Zeros);
            add(format!("stages.{si}.merge.reduction.weight"), vec![4 * d, 2 * d], Init::TruncNormal(0.02));
        }
    }
    let f = cfg.final_dim();
    let [h1, h2] = cfg.head_hidden;
    add("norm.gamma".into(), vec![f], Init::Ones);
    add("norm.beta".into(), vec![f], Init::Zeros);
    add("head.fc1.weight".into(), vec![f, h1], Init::TruncNormal(0.02));
    add("head.fc1.bias".into(), vec![h1], Init::Zeros);
    add("head.fc2.weight".into(), vec![h1, h2], Init::TruncNormal(0.02));
    add("head.fc2.bias".into(), vec![h2], Init::Zeros);
    add("head.out.weight".into(), vec![h2, 1], Init::TruncNormal(0.02));
    add("head.out.bias".into(), vec![1], Init::Zeros);
    out
}

/// Shapes the configuration calls for, without allocating them.
#[cfg(test)]
pub(crate) fn layout_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
    layout(cfg).into_iter().map(|(_, shape, _)| shape).collect()
}

/// All learnable tensors of a model, addressed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub init_seed: u64,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, init) in layout(cfg) {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::TruncNormal(std) => {
                    let normal = Normal::new(0.0, std).expect("positive std");
                    (0..n)
                        .map(|_| loop {
                            let v: f64 = normal.sample(&mut rng);
                            if v.abs() <= 2.0 * std {
                                break v;
                            }
                        })
                        .collect()
                }
            };
            names.push(name);
            tensors.push(Tensor::new(shape, data).expect("layout shape"));
        }
        Self::from_parts(seed, names, tensors)
    }

    pub fn from_parts(init_seed: u64, names: Vec<String>, tensors: Vec<Tensor>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self {
            init_seed,
            names,
            tensors,
            index,
        }
    }

    /// Fails unless names and shapes match what `cfg` expects.
    pub fn check_against(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let expected = layout(cfg);
        if expected.len() != self.names.len() {
            return Err(ModelError::ConfigMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.names.len()
            )));
        }
        for ((name, shape, _), (have, t)) in expected.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(ModelError::ConfigMismatch(format!(
                    "expected {name} {shape:?}, found {have} {:?}",
                    t.shape()
                )));
            }
        }
        if let Some(name) = self.iter().find(|(_, t)| t.data().iter().any(|v| !v.is_finite())).map(|(n, _)| n) {
            return Err(ModelError::ConfigMismatch(format!("{name} holds non-finite values")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Registers every tensor on `tape` as a trainable leaf.
    pub fn bind<'t, 'p>(&'p self, tape: &'t Tape) -> BoundParams<'t, 'p> {
        BoundParams {
            vars: self.tensors.iter().map(|t| tape.param(t.clone())).collect(),
            params: self,
        }
    }
}

/// Tape handles for a [`ModelParams`], in the same order.
pub struct BoundParams<'t, 'p> {
    pub vars: Vec<Var<'t>>,
    params: &'p ModelParams,
}

impl<'t> BoundParams<'t, '_> {
    pub fn get(&self, name: &str) -> Result<Var<'t>, ModelError> {
        self.params
            .index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| ModelError::ConfigMismatch(format!("missing parameter {name}")))
    }
}
