use serde::{Deserialize, Serialize};

use super::{Channel, FeatureError, Window};
use crate::signal::{wpd, FilterBank, SignalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageConfig {
    pub level: usize,
    /// Image side length; each subband fills `side / 2^level` consecutive rows.
    pub side: usize,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self { level: 3, side: 64 }
    }
}

impl ImageConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bands = 1usize << self.level;
        if self.level == 0 || self.side == 0 || self.side % bands != 0 {
            return Err(FeatureError::InvalidConfig(format!(
                "image side {} must be a positive multiple of 2^level = {bands}",
                self.side
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }
}

/// Min-max normalized wavelet-packet image of one channel over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WpdImage {
    pub side: usize,
    pub pixels: Vec<f32>,
    pub channel: Channel,
    pub source_window: Window,
}

impl WpdImage {
    pub fn normalized(&self) -> WpdImage {
        let mut out = self.clone();
        normalize_min_max(&mut out.pixels);
        out
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }
}

/// Maps to `[0, 1]`; a constant input becomes all zeros.
pub fn normalize_min_max(pixels: &mut [f32]) {
    let (lo, hi) = pixels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p as f64), hi.max(p as f64)));
    let range = hi - lo;
    for p in pixels.iter_mut() {
        *p = if range > 0.0 { ((*p as f64 - lo) / range) as f32 } else { 0.0 };
    }
}

fn resample_linear(x: &[f64], n: usize) -> Vec<f64> {
    if n == 1 || x.len() == 1 {
        return vec![x[0]; n];
    }
    let scale = (x.len() - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|j| {
            let t = j as f64 * scale;
            let i = (t.floor() as usize).min(x.len() - 2);
            let frac = t - i as f64;
            x[i] * (1.0 - frac) + x[i + 1] * frac
        })
        .collect()
}

/// Coefficient ranges at or below this fraction of the input amplitude count as constant.
const DEGENERATE_RANGE: f64 = 1e-10;

/// WPD of a window's concatenated samples, laid out as a square image.
///
/// The window mean is removed first, so a DC offset never reaches the image.
/// Subband `b` (natural order) is linearly resampled to `side^2 / 2^level`
/// points and written row-major into rows `b * rows .. (b + 1) * rows`.
pub fn wpd_image(
    window_signal: &[f64],
    cfg: &ImageConfig,
    fb: &FilterBank,
    channel: Channel,
    source_window: Window,
) -> Result<WpdImage, FeatureError> {
    cfg.validate()?;
    if window_signal.len() < cfg.pixels() {
        return Err(SignalError::TooShort {
            len: window_signal.len(),
            min: cfg.pixels(),
        }
        .into());
    }
    let mean = window_signal.iter().sum::<f64>() / window_signal.len() as f64;
    let centered: Vec<f64> = window_signal.iter().map(|v| v - mean).collect();
    let amplitude = window_signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tree = wpd(&centered, cfg.level, fb)?;
    let per_band = cfg.pixels() / tree.subbands.len();
    let mut raw = Vec::with_capacity(cfg.pixels());
    for band in &tree.subbands {
        raw.extend(resample_linear(band, per_band));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let degenerate = range <= DEGENERATE_RANGE * amplitude;
    let pixels = raw
        .iter()
        .map(|&v| if !degenerate { ((v - lo) / range) as f32 } else { 0.0 })
        .collect();
    Ok(WpdImage {
        side: cfg.side,
        pixels,
        channel,
        source_window,
    })
}
