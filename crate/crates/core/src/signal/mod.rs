//! Signal conditioning for vibration snapshots.
//!
//! Orthonormal Daubechies filter banks with periodized boundaries, single and
//! multi-level DWT, full wavelet packet trees, universal soft-threshold
//! denoising, Savitzky-Golay smoothing and the kurtosis statistic used as the
//! health indicator.

mod denoise;
mod savgol;
mod stats;
mod wavelet;

pub use denoise::{soft_threshold, universal_threshold, wavelet_denoise, MAD_TO_SIGMA};
pub use savgol::{savgol_filter, savgol_kernel, SavGolKernel};
pub use stats::{kurtosis, mean, median, variance};
pub use wavelet::{
    daubechies, db5_filters, dwt, dwt_level, idwt, idwt_level, wpd, DwtCoeffs, FilterBank,
    SubbandOrdering, WpdTree,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("empty input")]
    EmptyInput,
    #[error("signal too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("signal has zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
    #[error("window must be odd and positive, got {0}")]
    InvalidWindow(usize),
    #[error("polynomial order {order} must be below window {window}")]
    OrderTooHigh { order: usize, window: usize },
    #[error("decomposition level must be at least 1")]
    InvalidLevel,
    #[error("unsupported wavelet order db{0} (db1..db10 available)")]
    UnknownWavelet(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
}

/// A single-channel vibration snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalVector {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl SignalVector {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::EmptyInput);
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(SignalError::InvalidSampleRate);
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Same sample rate, new samples. Used by the filters, which never change length.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
