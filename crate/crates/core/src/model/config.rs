use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Full,
    Desk,
    Custom,
}

/// Architecture hyperparameters. Stage `i` works at width `embed_dim_base * 2^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub preset: Preset,
    /// Side of each input WPD image.
    pub image_side: usize,
    pub conv_channels: usize,
    pub embed_dim_base: usize,
    pub depths: [usize; 4],
    pub heads: [usize; 4],
    pub window_size: usize,
    pub mlp_ratio: f64,
    pub dropout_p: f64,
    pub head_hidden: [usize; 2],
}

/// Derived geometry of one transformer stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    pub side: usize,
    pub dim: usize,
    pub heads: usize,
    pub window: usize,
    pub depth: usize,
    pub mlp_hidden: usize,
}

impl ModelConfig {
    /// 64x64 images, C = 96 (final width 768), heads [3, 6, 12, 24], depths [2, 2, 6, 2].
    pub fn full() -> Self {
        Self {
            preset: Preset::Full,
            image_side: 64,
            conv_channels: 32,
            embed_dim_base: 96,
            depths: [2, 2, 6, 2],
            heads: [3, 6, 12, 24],
            window_size: 4,
            mlp_ratio: 4.0,
            dropout_p: 0.3,
            head_hidden: [256, 64],
        }
    }

    /// 32x32 images (16x16 token grid), C = 16, one block per stage.
    pub fn desk() -> Self {
        Self {
            preset: Preset::Desk,
            image_side: 32,
            conv_channels: 32,
            embed_dim_base: 16,
            depths: [1, 1, 1, 1],
            heads: [1, 2, 4, 8],
            window_size: 4,
            mlp_ratio: 4.0,
            dropout_p: 0.0,
            head_hidden: [64, 32],
        }
    }

    pub fn grid_side(&self) -> usize {
        self.image_side / 2
    }

    pub fn final_dim(&self) -> usize {
        self.embed_dim_base << 3
    }

    pub fn stages(&self) -> [StageShape; 4] {
        std::array::from_fn(|i| {
            let side = self.grid_side() >> i;
            let dim = self.embed_dim_base << i;
            StageShape {
                side,
                dim,
                heads: self.heads[i],
                window: self.window_size.min(side),
                depth: self.depths[i],
                mlp_hidden: ((dim as f64) * self.mlp_ratio).round() as usize,
            }
        })
    }

    /// Checks the whole shape pipeline up front.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.image_side % 16 != 0 || self.image_side == 0 {
            return bad(format!(
                "image side {} must be a positive multiple of 16 (pooling plus three merges)",
                self.image_side
            ));
        }
        if self.conv_channels == 0 || self.embed_dim_base == 0 || self.window_size == 0 {
            return bad("conv_channels, embed_dim_base and window_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if self.head_hidden.contains(&0) {
            return bad("head widths must be positive".into());
        }
        for (i, s) in self.stages().iter().enumerate() {
            if s.depth == 0 {
                return bad(format!("stage {i} has depth 0"));
            }
            if s.heads == 0 || s.dim % s.heads != 0 {
                return bad(format!("stage {i}: {} heads do not divide width {}", s.heads, s.dim));
            }
            if s.side % s.window != 0 {
                return Err(ModelError::IndivisibleGrid {
                    side: s.side,
                    window: s.window,
                });
            }
            if s.mlp_hidden == 0 {
                return bad(format!("stage {i}: mlp_ratio gives an empty hidden layer"));
            }
        }
        Ok(())
    }

    /// Parameter census derived from the configuration alone.
    pub fn parameter_count(&self) -> usize {
        let c = self.conv_channels;
        let cb = self.embed_dim_base;
        let stem = 2 * (c * 9 + c);
        let embed = 2 * c * cb + cb + 2 * cb;
        let mut total = stem + embed;
        let stages = self.stages();
        for (i, s) in stages.iter().enumerate() {
            let d = s.dim;
            let table = (2 * s.window - 1).pow(2) * s.heads;
            let block = 2 * d // norm1
                + d * 3 * d + 3 * d
                + table
                + d * d + d
                + 2 * d // norm2
                + d * s.mlp_hidden + s.mlp_hidden
                + s.mlp_hidden * d + d;
            total += s.depth * block;
            if i < 3 {
                total += 2 * 4 * d + 4 * d * 2 * d;
            }
        }
        let f = self.final_dim();
        let [h1, h2] = self.head_hidden;
        total + 2 * f + f * h1 + h1 + h1 * h2 + h2 + h2 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        ModelConfig::full().validate().unwrap();
        ModelConfig::desk().validate().unwrap();
    }

    #[test]
    fn full_stage_cascade() {
        let s = ModelConfig::full().stages();
        assert_eq!(s.map(|s| s.side), [32, 16, 8, 4]);
        assert_eq!(s.map(|s| s.dim), [96, 192, 384, 768]);
        assert_eq!(s.map(|s| s.window), [4, 4, 4, 4]);
        assert_eq!(ModelConfig::full().final_dim(), 768);
    }

    #[test]
    fn desk_window_clamps_to_grid() {
        let s = ModelConfig::desk().stages();
        assert_eq!(s.map(|s| s.side), [16, 8, 4, 2]);
        assert_eq!(s.map(|s| s.window), [4, 4, 4, 2]);
    }

    #[test]
    fn mismatches_fail_fast() {
        let mut c = ModelConfig::desk();
        c.heads[1] = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.window_size = 3;
        assert!(matches!(c.validate(), Err(ModelError::IndivisibleGrid { .. })));
        let mut c = ModelConfig::desk();
        c.image_side = 40;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.dropout_p = 1.0;
        assert!(c.validate().is_err());
    }
}
