use super::{dwt, idwt, median, FilterBank, SignalError, SignalVector};

/// Converts the median absolute deviation of Gaussian noise into its standard deviation.
pub const MAD_TO_SIGMA: f64 = 0.6745;

/// Universal threshold `sigma * sqrt(2 ln n)` with `sigma = median(|detail|) / 0.6745`.
///
/// `n` is the length of the original signal, not of the detail band.
pub fn universal_threshold(detail: &[f64], n: usize) -> Result<f64, SignalError> {
    if detail.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    if n < 2 {
        return Err(SignalError::TooShort { len: n, min: 2 });
    }
    let abs: Vec<f64> = detail.iter().map(|v| v.abs()).collect();
    let sigma = median(&abs)? / MAD_TO_SIGMA;
    Ok(sigma * (2.0 * (n as f64).ln()).sqrt())
}

pub fn soft_threshold(c: &[f64], t: f64) -> Result<Vec<f64>, SignalError> {
    if t.is_nan() || t < 0.0 {
        return Err(SignalError::NegativeThreshold(t));
    }
    Ok(c.iter()
        .map(|&v| v.signum() * (v.abs() - t).max(0.0))
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect())
}

/// Multi-level soft-threshold denoising.
///
/// The noise scale comes from the level-1 detail band and the same universal
/// threshold is applied to every detail band; the approximation is kept.
pub fn wavelet_denoise(
    x: &SignalVector,
    levels: usize,
    fb: &FilterBank,
) -> Result<SignalVector, SignalError> {
    let mut coeffs = dwt(x.samples(), levels, fb)?;
    let t = universal_threshold(&coeffs.details[0], x.len())?;
    for band in coeffs.details.iter_mut() {
        *band = soft_threshold(band, t)?;
    }
    let rec = idwt(&coeffs, fb)?;
    Ok(x.with_samples(rec))
}
