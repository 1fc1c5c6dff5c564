use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::features::{BearingRecord, Snapshot};
use crate::signal::SignalVector;

/// Share of samples drawn from the wide component of the healthy noise.
const WIDE_SHARE: f64 = 0.1;

/// Parameters of a synthetic run-to-failure record.
///
/// Healthy snapshots are zero-mean noise whose kurtosis is set by
/// `healthy_kurtosis_level` (3 gives plain Gaussian noise). From
/// `fault_onset_index` on, both channels carry the same train of decaying
/// resonance bursts whose amplitude is
/// `noise_std * fault_growth_rate * (i - onset + 1)` at snapshot `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_snapshots: usize,
    pub samples_per_snapshot: usize,
    pub sample_rate_hz: f64,
    pub healthy_kurtosis_level: f64,
    pub fault_onset_index: usize,
    pub fault_growth_rate: f64,
    pub noise_std: f64,
    pub impulse_rate_hz: f64,
    pub resonance_hz: f64,
    pub decay_s: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_snapshots: 100,
            samples_per_snapshot: 2560,
            sample_rate_hz: 25_600.0,
            healthy_kurtosis_level: 3.0,
            fault_onset_index: 50,
            fault_growth_rate: 1.0,
            noise_std: 1.0,
            impulse_rate_hz: 120.0,
            resonance_hz: 3_000.0,
            decay_s: 5e-4,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidConfig(m));
        if self.fault_onset_index == 0 || self.fault_onset_index >= self.n_snapshots {
            return bad(format!(
                "fault onset {} must lie strictly inside 0..{}",
                self.fault_onset_index, self.n_snapshots
            ));
        }
        if self.samples_per_snapshot < 4 {
            return bad("need at least 4 samples per snapshot".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be finite and non-negative, got {}", self.noise_std));
        }
        if !(self.fault_growth_rate >= 0.0 && self.fault_growth_rate.is_finite()) {
            return bad(format!("fault_growth_rate must be finite and non-negative, got {}", self.fault_growth_rate));
        }
        let max_level = 3.0 / WIDE_SHARE;
        if !(3.0..max_level).contains(&self.healthy_kurtosis_level) {
            return bad(format!(
                "healthy_kurtosis_level must lie in [3, {max_level}), got {}",
                self.healthy_kurtosis_level
            ));
        }
        for (name, v) in [
            ("sample_rate_hz", self.sample_rate_hz),
            ("impulse_rate_hz", self.impulse_rate_hz),
            ("resonance_hz", self.resonance_hz),
            ("decay_s", self.decay_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Kurtosis of a two-component zero-mean Gaussian scale mixture with standard
/// deviations 1 and `a`.
fn mixture_kurtosis(a: f64) -> f64 {
    let q = WIDE_SHARE;
    let a2 = a * a;
    3.0 * (1.0 - q + q * a2 * a2) / (1.0 - q + q * a2).powi(2)
}

/// Width of the wide component that gives kurtosis `level`. Increasing on `a >= 1`.
fn mixture_width(level: f64) -> f64 {
    if level <= 3.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while mixture_kurtosis(hi) < level {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mixture_kurtosis(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A deterministic function of `cfg`.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<BearingRecord, DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = mixture_width(cfg.healthy_kurtosis_level);
    let unit = cfg.noise_std / (1.0 - WIDE_SHARE + WIDE_SHARE * a * a).sqrt();
    let n = cfg.samples_per_snapshot;
    let period = cfg.sample_rate_hz / cfg.impulse_rate_hz;
    let burst_len = ((8.0 * cfg.decay_s * cfg.sample_rate_hz).ceil() as usize).max(1);
    let burst: Vec<f64> = (0..burst_len)
        .map(|k| {
            let t = k as f64 / cfg.sample_rate_hz;
            (-t / cfg.decay_s).exp() * (std::f64::consts::TAU * cfg.resonance_hz * t).sin()
        })
        .collect();

    let mut snapshots = Vec::with_capacity(cfg.n_snapshots);
    for i in 0..cfg.n_snapshots {
        let phase: f64 = rng.random_range(0.0..period);
        let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    let wide = rng.random::<f64>() < WIDE_SHARE;
                    unit * if wide { a * z } else { z }
                })
                .collect()
        };
        let mut h = noise(&mut rng);
        let mut v = noise(&mut rng);
        if i >= cfg.fault_onset_index {
            let amp = cfg.noise_std * cfg.fault_growth_rate * (i - cfg.fault_onset_index + 1) as f64;
            let mut start = phase;
            while (start as usize) < n {
                let s = start as usize;
                for (k, b) in burst.iter().enumerate().take(n - s) {
                    h[s + k] += amp * b;
                    v[s + k] += amp * b;
                }
                start += period;
            }
        }
        let sig = |x| SignalVector::new(x, cfg.sample_rate_hz).map_err(|e| DataError::InvalidConfig(e.to_string()));
        snapshots.push(Snapshot { horizontal: sig(h)?, vertical: sig(v)? });
    }
    Ok(BearingRecord::new(snapshots, 10.0, format!("synthetic-{}", cfg.seed), 0)?)
}
