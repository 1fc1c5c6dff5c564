use super::SignalError;

pub fn mean(x: &[f64]) -> Result<f64, SignalError> {
    if x.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

/// Population variance (central second moment).
pub fn variance(x: &[f64]) -> Result<f64, SignalError> {
    let mu = mean(x)?;
    Ok(x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64)
}

pub fn median(x: &[f64]) -> Result<f64, SignalError> {
    if x.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Pearson (non-excess) kurtosis `m4 / m2^2`; a Gaussian gives 3.
pub fn kurtosis(x: &[f64]) -> Result<f64, SignalError> {
    if x.len() < 4 {
        return Err(SignalError::TooShort { len: x.len(), min: 4 });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(SignalError::ZeroVariance);
    }
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), &v| {
        let d2 = (v - mu) * (v - mu);
        (m2 + d2, m4 + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 <= 0.0 {
        return Err(SignalError::ZeroVariance);
    }
    Ok(m4 / (m2 * m2))
}
