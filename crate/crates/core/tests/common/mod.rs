#![allow(dead_code)]

pub mod checks;
pub mod gradchecks;
pub mod oracles;

use indepcam::nn::{Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub const FD_STEP: f64 = 1e-4;

pub fn randn(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = Normal::new(0.0, scale).unwrap();
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| nd.sample(&mut rng)).collect()).unwrap()
}

pub fn rand_uniform(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new(lo, hi).unwrap();
    (0..n).map(|_| u.sample(&mut rng)).collect()
}

/// Largest per-element relative error between reverse-mode gradients and
/// central differences of `build` with respect to each input tensor.
///
/// `build` receives the tape and one leaf per input and returns a scalar.
pub fn max_rel_error<F>(inputs: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |vals: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &vars);
    tape.backward(out).unwrap();
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| tape.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        for e in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            let a = analytic[k].data()[e];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

/// `mean((y - target)^2)` with a fixed pseudo-random target, used to reduce a
/// layer output to a scalar with non-trivial gradients everywhere.
pub fn probe_loss(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let n = tape.value(y).len();
    let target = rand_uniform(n, seed, -1.0, 1.0);
    tape.mse(y, &target).unwrap()
}
