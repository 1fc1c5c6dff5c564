use serde::{Deserialize, Serialize};

use super::{SignalError, SignalVector};

/// Centered least-squares smoothing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavGolKernel {
    pub weights: Vec<f64>,
    pub window: usize,
    pub poly_order: usize,
}

/// Gram polynomial `P_k(i)` on the `2m+1` points `-m..=m`.
fn gram(k: usize, m: usize, i: f64) -> f64 {
    let m2 = 2.0 * m as f64;
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 1..=k {
        let jf = j as f64;
        let next = 2.0 * (2.0 * jf - 1.0) / (jf * (m2 - jf + 1.0)) * i * cur
            - (jf - 1.0) * (m2 + jf) / (jf * (m2 - jf + 1.0)) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `a (a-1) ... (a-b+1)`
fn falling(a: f64, b: usize) -> f64 {
    (0..b).map(|j| a - j as f64).product()
}

/// Smoothing weights for the window center, built from orthogonal Gram
/// polynomials so no linear system has to be solved.
pub fn savgol_kernel(window: usize, order: usize) -> Result<SavGolKernel, SignalError> {
    if window == 0 || window % 2 == 0 {
        return Err(SignalError::InvalidWindow(window));
    }
    if order >= window {
        return Err(SignalError::OrderTooHigh { order, window });
    }
    let m = window / 2;
    let m2 = 2.0 * m as f64;
    let weights = (0..window)
        .map(|idx| {
            let i = idx as f64 - m as f64;
            (0..=order)
                .map(|k| {
                    let norm = (2 * k + 1) as f64 * falling(m2, k) / falling(m2 + k as f64 + 1.0, k + 1);
                    norm * gram(k, m, i) * gram(k, m, 0.0)
                })
                .sum()
        })
        .collect();
    Ok(SavGolKernel {
        weights,
        window,
        poly_order: order,
    })
}

/// Centered convolution with mirror extension (edge sample not repeated).
pub fn savgol_filter(x: &SignalVector, k: &SavGolKernel) -> Result<SignalVector, SignalError> {
    let n = x.len();
    if n < k.window {
        return Err(SignalError::TooShort { len: n, min: k.window });
    }
    let half = (k.window / 2) as isize;
    let s = x.samples();
    let mirror = |i: isize| -> f64 {
        let last = n as isize - 1;
        let j = if i < 0 {
            -i
        } else if i > last {
            2 * last - i
        } else {
            i
        };
        s[j as usize]
    };
    let out = (0..n as isize)
        .map(|i| {
            k.weights
                .iter()
                .enumerate()
                .map(|(t, w)| w * mirror(i + t as isize - half))
                .sum()
        })
        .collect();
    Ok(x.with_samples(out))
}
