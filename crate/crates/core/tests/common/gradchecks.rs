//! Finite-difference cases for every layer and the HSIC term. Each returns
//! `(case, max relative error)` pairs.

use indepcam::matrix::Matrix;
use indepcam::nn::{layers, BnMode, Bound, Padding, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{max_rel_error, probe_loss, randn};

pub const TOL: f64 = 1e-3;

pub type Errors = Vec<(String, f64)>;

pub fn conv1d() -> Errors {
    [
        (1, 1, Padding::Same, 9),
        (2, 1, Padding::Same, 10),
        (1, 4, Padding::Same, 12),
        (1, 2, Padding::None, 11),
    ]
    .into_iter()
    .map(|(stride, dilation, padding, t)| {
        let x = randn(&[2, 3, t], 1, 1.0);
        let w = randn(&[4, 3, 3], 2, 0.5);
        let b = randn(&[4], 3, 0.1);
        let err = max_rel_error(&[x, w, b], |tape, v| {
            let y = tape.conv1d(v[0], v[1], Some(v[2]), stride, dilation, padding).unwrap();
            probe_loss(tape, y, 4)
        });
        (format!("conv1d stride {stride} dilation {dilation} {padding:?}"), err)
    })
    .collect()
}

pub fn residual_block() -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::new();
    layers::init_residual_block(&mut store, &mut rng, "rb", 4, 3);
    let names: Vec<String> = store.params().map(|(k, _)| k.clone()).collect();
    let mut inputs = vec![randn(&[1, 4, 32], 10, 1.0)];
    inputs.extend(names.iter().map(|n| store.get(n).unwrap().clone()));
    let err = max_rel_error(&inputs, |tape, v| {
        let bound = Bound::from_vars(names.iter().cloned().zip(v[1..].iter().copied()));
        let (res, skip) = layers::residual_block(tape, &bound, "rb", v[0], 4).unwrap();
        let sum = tape.add(res, skip).unwrap();
        probe_loss(tape, sum, 11)
    });
    vec![("residual block 1x4x32".into(), err)]
}

pub fn pooling_and_activations() -> Errors {
    let x = randn(&[2, 3, 8], 20, 1.0);
    ["relu", "maxpool2", "masked gap", "tanh", "sigmoid"]
        .iter()
        .enumerate()
        .map(|(which, name)| {
            let err = max_rel_error(std::slice::from_ref(&x), |tape, v| {
                let y = match which {
                    0 => tape.relu(v[0]),
                    1 => tape.maxpool2(v[0]).unwrap(),
                    2 => tape.global_avg_pool(v[0], Some(&[5, 8])).unwrap(),
                    3 => tape.tanh(v[0]),
                    _ => tape.sigmoid(v[0]),
                };
                probe_loss(tape, y, 21)
            });
            (name.to_string(), err)
        })
        .collect()
}

pub fn dropout() -> Errors {
    let x = randn(&[2, 3, 8], 22, 1.0);
    let err = max_rel_error(&[x], |tape, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = tape.dropout(v[0], 0.3, &mut rng).unwrap();
        probe_loss(tape, y, 23)
    });
    vec![("dropout, fixed mask".into(), err)]
}

pub fn batchnorm() -> Errors {
    let x = randn(&[5, 3], 30, 1.5);
    let gamma = randn(&[3], 31, 1.0);
    let beta = randn(&[3], 32, 1.0);
    let train = max_rel_error(&[x.clone(), gamma.clone(), beta.clone()], |tape, v| {
        let (y, _) = tape.batchnorm(v[0], v[1], v[2], BnMode::Train).unwrap();
        probe_loss(tape, y, 33)
    });
    let eval = max_rel_error(&[x, gamma, beta], |tape, v| {
        let mode = BnMode::Eval { running_mean: &[0.1, -0.2, 0.3], running_var: &[0.5, 1.5, 2.0] };
        let (y, _) = tape.batchnorm(v[0], v[1], v[2], mode).unwrap();
        probe_loss(tape, y, 34)
    });
    vec![("batchnorm train".into(), train), ("batchnorm eval".into(), eval)]
}

pub fn linear_head() -> Errors {
    let f = randn(&[4, 2], 40, 1.0);
    let g = randn(&[4, 3], 41, 1.0);
    let w = randn(&[3, 5], 42, 0.7);
    let b = randn(&[3], 43, 0.1);
    let err = max_rel_error(&[f, g, w, b], |tape, v| {
        let fg = tape.concat_cols(v[0], v[1]).unwrap();
        let logits = tape.linear(fg, v[2], v[3]).unwrap();
        tape.softmax_cross_entropy(logits, &[0, 2, 1, 2]).unwrap()
    });
    vec![("concat, linear, cross-entropy".into(), err)]
}

pub fn elementwise() -> Errors {
    let a = randn(&[6], 50, 1.0);
    let b = randn(&[6], 51, 1.0);
    let err = max_rel_error(&[a, b], |tape, v| {
        let m = tape.mul(v[0], v[1]).unwrap();
        let s = tape.scale(m, -2.5);
        let y = tape.add(s, v[0]).unwrap();
        probe_loss(tape, y, 52)
    });
    vec![("mul, scale, add".into(), err)]
}

pub fn hsic_term() -> Errors {
    let f = Matrix::from_vec(6, 2, randn(&[6, 2], 60, 1.0).into_data()).unwrap();
    let g = randn(&[6, 3], 61, 1.0);
    let err = max_rel_error(&[g], |tape, v| tape.hsic(v[0], &f, 1.3, 1.7).unwrap());
    vec![("hsic n=6 d=3".into(), err)]
}

pub fn all() -> Errors {
    [conv1d, residual_block, pooling_and_activations, dropout, batchnorm, linear_head, elementwise, hsic_term]
        .iter()
        .flat_map(|f| f())
        .collect()
}
