//! Index plans for (shifted) window attention on a square token grid.
//!
//! Window partitioning, the cyclic shift, head splitting and the inverse
//! mapping are all expressed as gathers, so the tape only ever sees
//! `gather`, `bmm`, `softmax` and `add`.

use std::sync::Arc;

use super::ModelError;
use crate::tensor::{Tensor, TensorError, Var};

/// Relative-position lookup for a `window x window` patch: entry
/// `[i * w2 + j]` indexes a `(2w-1)^2` table by the offset from token `j` to `i`.
pub fn relative_position_index(window: usize) -> Vec<usize> {
    let w2 = window * window;
    let span = 2 * window - 1;
    let mut out = Vec::with_capacity(w2 * w2);
    for i in 0..w2 {
        let (yi, xi) = (i / window, i % window);
        for j in 0..w2 {
            let (yj, xj) = (j / window, j % window);
            let dy = yi + window - 1 - yj;
            let dx = xi + window - 1 - xj;
            out.push(dy * span + dx);
        }
    }
    out
}

/// Precomputed gathers and mask for one attention layout.
#[derive(Debug, Clone)]
pub struct WindowPlan {
    pub side: usize,
    pub window: usize,
    pub shift: usize,
    pub heads: usize,
    pub dim: usize,
    /// `token_of[win * w2 + t]` is the grid token sitting at slot `t` of window `win`.
    pub token_of: Vec<usize>,
    q_idx: Arc<[usize]>,
    kt_idx: Arc<[usize]>,
    v_idx: Arc<[usize]>,
    bias_idx: Arc<[usize]>,
    merge_idx: Arc<[usize]>,
    mask: Option<Tensor>,
}

impl WindowPlan {
    pub fn new(side: usize, window: usize, shifted: bool, heads: usize, dim: usize) -> Result<Self, ModelError> {
        if window == 0 || side % window != 0 {
            return Err(ModelError::IndivisibleGrid { side, window });
        }
        if heads == 0 || dim % heads != 0 {
            return Err(ModelError::Config(format!("{heads} heads do not divide dim {dim}")));
        }
        // a single window covering the grid has nothing to shift across
        let shift = if shifted && window < side { window / 2 } else { 0 };
        let per_side = side / window;
        let windows = per_side * per_side;
        let w2 = window * window;
        let hd = dim / heads;

        let mut token_of = Vec::with_capacity(side * side);
        for wy in 0..per_side {
            for wx in 0..per_side {
                for ty in 0..window {
                    for tx in 0..window {
                        let r = (wy * window + ty + shift) % side;
                        let c = (wx * window + tx + shift) % side;
                        token_of.push(r * side + c);
                    }
                }
            }
        }

        let qkv_stride = 3 * dim;
        let mut q_idx = Vec::with_capacity(side * side * dim);
        let mut kt_idx = Vec::with_capacity(side * side * dim);
        let mut v_idx = Vec::with_capacity(side * side * dim);
        for win in 0..windows {
            for h in 0..heads {
                for t in 0..w2 {
                    let tok = token_of[win * w2 + t];
                    for j in 0..hd {
                        q_idx.push(tok * qkv_stride + h * hd + j);
                        v_idx.push(tok * qkv_stride + 2 * dim + h * hd + j);
                    }
                }
                for j in 0..hd {
                    for t in 0..w2 {
                        let tok = token_of[win * w2 + t];
                        kt_idx.push(tok * qkv_stride + dim + h * hd + j);
                    }
                }
            }
        }

        let rel = relative_position_index(window);
        let mut bias_idx = Vec::with_capacity(windows * heads * w2 * w2);
        for _ in 0..windows {
            for h in 0..heads {
                bias_idx.extend(rel.iter().map(|&r| r * heads + h));
            }
        }

        let mut merge_idx = vec![0; side * side * dim];
        for win in 0..windows {
            for t in 0..w2 {
                let tok = token_of[win * w2 + t];
                for h in 0..heads {
                    for j in 0..hd {
                        merge_idx[tok * dim + h * hd + j] = ((win * heads + h) * w2 + t) * hd + j;
                    }
                }
            }
        }

        let mask = (shift > 0).then(|| {
            // region label of a coordinate in the shifted frame
            let region = |v: usize| {
                if v < side - window {
                    0
                } else if v < side - shift {
                    1
                } else {
                    2
                }
            };
            let mut m = Vec::with_capacity(windows * heads * w2 * w2);
            for wy in 0..per_side {
                for wx in 0..per_side {
                    let label = |t: usize| {
                        3 * region(wy * window + t / window) + region(wx * window + t % window)
                    };
                    let block: Vec<f64> = (0..w2 * w2)
                        .map(|e| if label(e / w2) == label(e % w2) { 0.0 } else { f64::NEG_INFINITY })
                        .collect();
                    for _ in 0..heads {
                        m.extend_from_slice(&block);
                    }
                }
            }
            Tensor::new(vec![windows * heads, w2, w2], m).expect("mask shape")
        });

        Ok(Self {
            side,
            window,
            shift,
            heads,
            dim,
            token_of,
            q_idx: q_idx.into(),
            kt_idx: kt_idx.into(),
            v_idx: v_idx.into(),
            bias_idx: bias_idx.into(),
            merge_idx: merge_idx.into(),
            mask,
        })
    }

    pub fn windows(&self) -> usize {
        (self.side / self.window).pow(2)
    }

    pub fn mask(&self) -> Option<&Tensor> {
        self.mask.as_ref()
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

pub struct AttentionWeights<'t> {
    pub qkv_weight: Var<'t>,
    pub qkv_bias: Var<'t>,
    /// `[(2w-1)^2, heads]`
    pub rel_bias: Var<'t>,
    pub proj_weight: Var<'t>,
    pub proj_bias: Var<'t>,
}

pub struct AttentionOutput<'t> {
    /// `[side^2, dim]`
    pub tokens: Var<'t>,
    /// `[windows * heads, w2, w2]`; each row sums to one.
    pub attention: Var<'t>,
}

/// Multi-head self-attention inside each window of `plan`, scaled by `1/sqrt(head_dim)`.
pub fn window_attention<'t>(
    x: Var<'t>,
    w: &AttentionWeights<'t>,
    plan: &WindowPlan,
) -> Result<AttentionOutput<'t>, TensorError> {
    let tape = x.tape;
    let (l, d) = (plan.side * plan.side, plan.dim);
    let shape = x.shape();
    if shape != [l, d] {
        return Err(crate::tensor::mismatch("window_attention", &shape, &[l, d]));
    }
    let batch = plan.windows() * plan.heads;
    let w2 = plan.window * plan.window;
    let hd = plan.head_dim();
    let qkv = x.matmul(w.qkv_weight)?.add_bias(w.qkv_bias)?;
    let q = qkv.gather(plan.q_idx.clone(), &[batch, w2, hd])?;
    let kt = qkv.gather(plan.kt_idx.clone(), &[batch, hd, w2])?;
    let v = qkv.gather(plan.v_idx.clone(), &[batch, w2, hd])?;
    let bias = w.rel_bias.gather(plan.bias_idx.clone(), &[batch, w2, w2])?;
    let mut scores = q.bmm(kt)?.scale(1.0 / (hd as f64).sqrt()).add(bias)?;
    if let Some(mask) = &plan.mask {
        scores = scores.add(tape.constant(mask.clone()))?;
    }
    let attention = scores.softmax();
    let out = attention.bmm(v)?.gather(plan.merge_idx.clone(), &[l, d])?;
    let tokens = out.matmul(w.proj_weight)?.add_bias(w.proj_bias)?;
    Ok(AttentionOutput { tokens, attention })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unshifted_partition() {
        let plan = WindowPlan::new(8, 4, false, 2, 8).unwrap();
        assert_eq!(plan.windows(), 4);
        assert_eq!(plan.shift, 0);
        assert!(plan.mask().is_none());
        // first window holds the top-left 4x4 block
        let first: Vec<usize> = plan.token_of[..16].to_vec();
        let expected: Vec<usize> = (0..4).flat_map(|r| (0..4).map(move |c| r * 8 + c)).collect();
        assert_eq!(first, expected);
        let mut all = plan.token_of.clone();
        all.sort();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn shift_is_cyclic_and_masked() {
        let plan = WindowPlan::new(8, 4, true, 1, 4).unwrap();
        assert_eq!(plan.shift, 2);
        assert_eq!(plan.token_of[0], 2 * 8 + 2);
        let mask = plan.mask().unwrap();
        // top-left window is interior: nothing masked
        assert!(mask.data()[..256].iter().all(|&v| v == 0.0));
        // the bottom-right window mixes wrapped regions
        let last = &mask.data()[3 * 256..];
        assert!(last.iter().any(|v| v.is_infinite()));
        for t in 0..16 {
            assert_eq!(last[t * 16 + t], 0.0);
        }
    }

    #[test]
    fn grid_equal_to_window_never_shifts() {
        let plan = WindowPlan::new(4, 4, true, 1, 4).unwrap();
        assert_eq!(plan.shift, 0);
        assert!(plan.mask().is_none());
        assert!(matches!(WindowPlan::new(6, 4, false, 1, 4), Err(ModelError::IndivisibleGrid { .. })));
    }

    #[test]
    fn relative_index_is_symmetric_about_center() {
        let rel = relative_position_index(2);
        // offsets (0,0) map to the table center
        for i in 0..4 {
            assert_eq!(rel[i * 4 + i], 4);
        }
        assert_eq!(rel.iter().max(), Some(&8));
    }
}
