//! Central finite-difference gradient checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const TOL: f64 = 1e-4;

/// Uniform entries in `[-1, 1)`.
pub fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape matches data")
}

/// Max relative error between the tape gradient of `sum(f(inputs) * r)` and
/// central differences of the same scalar, where `r` is a fixed random
/// projection drawn from `seed`.
pub fn gradcheck(inputs: &[Tensor], seed: u64, f: impl for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe_shape = {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        f(&tape, &vars).shape()
    };
    let weights = random(&probe_shape, &mut rng);
    let scalar = |ins: &[Tensor]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<_> = ins.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&tape, &vars);
        out.value().data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&tape, &vars);
    let w = tape.constant(weights.clone());
    let loss = out.mul(w).expect("projection has the output shape").sum();
    let grads = tape.backward(loss).expect("scalar loss");

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k]);
        for i in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= STEP;
            let numeric = (scalar(&plus) - scalar(&minus)) / (2.0 * STEP);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

