//! Named parameter storage and the layer building blocks used by the
//! networks.

use std::collections::BTreeMap;

use rand::Rng;

use super::conv::Padding;
use super::tape::{BatchStats, BnMode, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;

/// Trainable parameters plus non-trainable buffers (batch-norm running
/// statistics), both keyed by dotted names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    buffers: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.params.insert(name.into(), t);
    }

    pub fn insert_buffer(&mut self, name: impl Into<String>, t: Tensor) {
        self.buffers.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn buffer(&self, name: &str) -> Result<&Tensor> {
        self.buffers
            .get(name)
            .ok_or_else(|| Error::invalid(format!("unknown buffer {name}")))
    }

    pub fn buffer_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.buffers
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("unknown buffer {name}")))
    }

    pub fn params(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.buffers.iter()
    }

    pub fn num_params(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        Bound(
            self.params
                .iter()
                .map(|(k, t)| (k.clone(), tape.leaf(t.clone(), trainable)))
                .collect(),
        )
    }

    /// Applies a training-mode batch-norm observation to the running stats.
    pub fn update_running_stats(&mut self, name: &str, stats: &BatchStats) -> Result<()> {
        for (suffix, obs) in [("running_mean", &stats.mean), ("running_var", &stats.var)] {
            let buf = self.buffer_mut(&format!("{name}.{suffix}"))?;
            for (r, o) in buf.data_mut().iter_mut().zip(obs.iter()) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * o;
            }
        }
        Ok(())
    }
}

/// Tape handles for a bound [`ParamStore`].
pub struct Bound(BTreeMap<String, Var>);

impl Bound {
    pub fn from_vars(vars: impl IntoIterator<Item = (String, Var)>) -> Self {
        Self(vars.into_iter().collect())
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    /// Gradients of every bound parameter; zero where none flowed.
    pub fn grads(&self, tape: &Tape) -> BTreeMap<String, Tensor> {
        self.0
            .iter()
            .map(|(k, v)| {
                let g = tape
                    .grad(*v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(tape.value(*v).shape()));
                (k.clone(), g)
            })
            .collect()
    }
}

fn he_uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-bound..bound)).collect()).unwrap()
}

pub fn init_conv(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    name: &str,
    c_in: usize,
    c_out: usize,
    kernel: usize,
) {
    store.insert(
        format!("{name}.weight"),
        he_uniform(rng, &[c_out, c_in, kernel], c_in * kernel),
    );
    store.insert(format!("{name}.bias"), Tensor::zeros(&[c_out]));
}

pub fn init_linear(store: &mut ParamStore, rng: &mut impl Rng, name: &str, d_in: usize, d_out: usize) {
    store.insert(format!("{name}.weight"), he_uniform(rng, &[d_out, d_in], d_in.max(1)));
    store.insert(format!("{name}.bias"), Tensor::zeros(&[d_out]));
}

pub fn init_batchnorm(store: &mut ParamStore, name: &str, c: usize) {
    store.insert(format!("{name}.gamma"), Tensor::full(&[c], 1.0));
    store.insert(format!("{name}.beta"), Tensor::zeros(&[c]));
    store.insert_buffer(format!("{name}.running_mean"), Tensor::zeros(&[c]));
    store.insert_buffer(format!("{name}.running_var"), Tensor::full(&[c], 1.0));
}

/// Parameters of one gated residual block: dilated filter and gate
/// convolutions plus 1x1 residual and skip projections.
pub fn init_residual_block(store: &mut ParamStore, rng: &mut impl Rng, name: &str, channels: usize, kernel: usize) {
    init_conv(store, rng, &format!("{name}.filter"), channels, channels, kernel);
    init_conv(store, rng, &format!("{name}.gate"), channels, channels, kernel);
    init_conv(store, rng, &format!("{name}.residual"), channels, channels, 1);
    init_conv(store, rng, &format!("{name}.skip"), channels, channels, 1);
}

pub fn conv1d(
    tape: &mut Tape,
    p: &Bound,
    name: &str,
    x: Var,
    stride: usize,
    dilation: usize,
    padding: Padding,
) -> Result<Var> {
    let w = p.get(&format!("{name}.weight"))?;
    let b = p.get(&format!("{name}.bias"))?;
    tape.conv1d(x, w, Some(b), stride, dilation, padding)
}

/// `z = tanh(W_f * x) . sigmoid(W_g * x)`; returns `(x + W_r z, W_s z)`.
/// Temporal length is preserved.
pub fn residual_block(tape: &mut Tape, p: &Bound, name: &str, x: Var, dilation: usize) -> Result<(Var, Var)> {
    let f = conv1d(tape, p, &format!("{name}.filter"), x, 1, dilation, Padding::Same)?;
    let g = conv1d(tape, p, &format!("{name}.gate"), x, 1, dilation, Padding::Same)?;
    let f = tape.tanh(f);
    let g = tape.sigmoid(g);
    let z = tape.mul(f, g)?;
    let r = conv1d(tape, p, &format!("{name}.residual"), z, 1, 1, Padding::Same)?;
    let s = conv1d(tape, p, &format!("{name}.skip"), z, 1, 1, Padding::Same)?;
    let out = tape.add(x, r)?;
    Ok((out, s))
}

pub fn linear(tape: &mut Tape, p: &Bound, name: &str, x: Var) -> Result<Var> {
    let w = p.get(&format!("{name}.weight"))?;
    let b = p.get(&format!("{name}.bias"))?;
    tape.linear(x, w, b)
}

pub fn batchnorm1d(
    tape: &mut Tape,
    p: &Bound,
    store: &ParamStore,
    name: &str,
    x: Var,
    train: bool,
) -> Result<(Var, Option<BatchStats>)> {
    let gamma = p.get(&format!("{name}.gamma"))?;
    let beta = p.get(&format!("{name}.beta"))?;
    if train {
        tape.batchnorm(x, gamma, beta, BnMode::Train)
    } else {
        let rm = store.buffer(&format!("{name}.running_mean"))?.data().to_vec();
        let rv = store.buffer(&format!("{name}.running_var"))?.data().to_vec();
        tape.batchnorm(
            x,
            gamma,
            beta,
            BnMode::Eval {
                running_mean: &rm,
                running_var: &rv,
            },
        )
    }
}
