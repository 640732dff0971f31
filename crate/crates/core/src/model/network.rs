use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::layers;
use crate::nn::{BatchStats, Bound, Padding, ParamStore, Tape, Tensor, Var};

pub const INPUT: &str = "input";
pub const HEAD: [&str; 2] = ["head1", "head2"];
pub const BN: &str = "bn";
pub const FC: &str = "fc";

const EVAL_BATCH: usize = 64;

pub fn block_name(i: usize) -> String {
    format!("block{i}")
}

/// Padded signals with their labels and standardized external features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    pub ids: Vec<String>,
    /// One row per record, each `input_len * in_channels` long (channel-major).
    pub signals: Vec<Vec<f64>>,
    /// Unpadded lengths.
    pub lengths: Vec<usize>,
    pub labels: Vec<usize>,
    /// `n x d_f`; zero columns for the plain classifier.
    pub features: Matrix,
}

impl ModelInputs {
    pub fn new(
        ids: Vec<String>,
        signals: Vec<Vec<f64>>,
        lengths: Vec<usize>,
        labels: Vec<usize>,
        features: Matrix,
    ) -> Result<Self> {
        let n = ids.len();
        if signals.len() != n || lengths.len() != n || labels.len() != n || features.rows != n {
            return Err(Error::invalid(format!(
                "inconsistent input counts: {n} ids, {} signals, {} lengths, {} labels, {} feature rows",
                signals.len(),
                lengths.len(),
                labels.len(),
                features.rows
            )));
        }
        if let Some(s) = signals.first() {
            if signals.iter().any(|r| r.len() != s.len()) {
                return Err(Error::invalid("signals must share one padded length"));
            }
        }
        Ok(Self {
            ids,
            signals,
            lengths,
            labels,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            signals: idx.iter().map(|&i| self.signals[i].clone()).collect(),
            lengths: idx.iter().map(|&i| self.lengths[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            features: self.features.select_rows(idx),
        }
    }

    fn batch_signals(&self, idx: &[usize], in_channels: usize, input_len: usize) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * in_channels * input_len);
        for &i in idx {
            let s = &self.signals[i];
            if s.len() != in_channels * input_len {
                return Err(Error::ShapeMismatch {
                    expected: vec![in_channels, input_len],
                    got: vec![s.len()],
                });
            }
            data.extend_from_slice(s);
        }
        Tensor::from_vec(&[idx.len(), in_channels, input_len], data)
    }

    fn batch_features(&self, idx: &[usize]) -> Tensor {
        let d = self.features.cols;
        let data = idx.iter().flat_map(|&i| self.features.row(i).to_vec()).collect();
        Tensor::from_vec(&[idx.len(), d], data).expect("rows have d columns")
    }
}

/// Handles produced by one forward pass.
pub struct Forward {
    pub logits: Var,
    pub g: Var,
    /// Pre-pooling activations, `B x latent_dim x input_len/2`.
    pub feature_maps: Var,
    pub bn_stats: Option<BatchStats>,
}

/// Eval-mode outputs for a set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Matrix,
    pub g: Matrix,
    /// Per record `latent_dim x input_len/2`, when requested.
    pub feature_maps: Option<Vec<Matrix>>,
}

impl Prediction {
    pub fn predicted_labels(&self) -> Vec<usize> {
        (0..self.logits.rows)
            .map(|i| {
                let row = self.logits.row(i);
                (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub store: ParamStore,
}

impl Network {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let (c, k) = (config.channels, config.kernel_size);
        layers::init_conv(&mut store, &mut rng, INPUT, config.in_channels, c, k);
        for i in 0..config.dilations.len() {
            layers::init_residual_block(&mut store, &mut rng, &block_name(i), c, k);
        }
        let [h1, h2] = config.head_channels;
        layers::init_conv(&mut store, &mut rng, HEAD[0], c, h1, k);
        layers::init_conv(&mut store, &mut rng, HEAD[1], h1, h2, k);
        layers::init_batchnorm(&mut store, BN, h2);
        layers::init_linear(&mut store, &mut rng, FC, config.feature_dim + h2, config.classes);
        Ok(Self { config, store })
    }

    /// Builds the graph for a batch. Dropout and batch statistics are used
    /// when `train_rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
        f: Option<Var>,
        latent_lengths: Option<&[usize]>,
        mut train_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        let cfg = &self.config;
        let xs = tape.value(x).shape().to_vec();
        if xs.len() != 3 || xs[1] != cfg.in_channels || xs[2] != cfg.input_len {
            return Err(Error::ShapeMismatch {
                expected: vec![xs.first().copied().unwrap_or(0), cfg.in_channels, cfg.input_len],
                got: xs,
            });
        }
        let batch = xs[0];
        let mut h = layers::conv1d(tape, p, INPUT, x, 2, 1, Padding::Same)?;
        let mut skip: Option<Var> = None;
        for (i, &d) in cfg.dilations.iter().enumerate() {
            let (out, s) = layers::residual_block(tape, p, &block_name(i), h, d)?;
            h = out;
            skip = Some(match skip {
                Some(acc) => tape.add(acc, s)?,
                None => s,
            });
        }
        let mut z = skip.unwrap_or(h);
        for name in HEAD {
            z = layers::conv1d(tape, p, name, z, 1, 1, Padding::Same)?;
            z = tape.relu(z);
            z = tape.maxpool2(z)?;
            if let Some(rng) = train_rng.as_deref_mut() {
                z = tape.dropout(z, cfg.dropout, rng)?;
            }
        }
        let maps = z;
        let pooled = tape.global_avg_pool(maps, latent_lengths)?;
        let (g, bn_stats) =
            layers::batchnorm1d(tape, p, &self.store, BN, pooled, train_rng.is_some())?;
        let head_in = match (cfg.feature_dim, f) {
            (0, _) => g,
            (d, Some(f)) => {
                let fs = tape.value(f).shape();
                if fs != [batch, d] {
                    return Err(Error::ShapeMismatch {
                        expected: vec![batch, d],
                        got: fs.to_vec(),
                    });
                }
                tape.concat_cols(f, g)?
            }
            (d, None) => {
                return Err(Error::invalid(format!(
                    "model expects {d} external features per record"
                )))
            }
        };
        let logits = layers::linear(tape, p, FC, head_in)?;
        Ok(Forward {
            logits,
            g,
            feature_maps: maps,
            bn_stats,
        })
    }

    /// Latent lengths covering only the unpadded part of each record.
    pub fn latent_lengths(&self, inputs: &ModelInputs, idx: &[usize]) -> Vec<usize> {
        let t = self.config.latent_len();
        idx.iter()
            .map(|&i| inputs.lengths[i].div_ceil(2).clamp(1, t))
            .collect()
    }

    pub(crate) fn batch_leaves(
        &self,
        tape: &mut Tape,
        inputs: &ModelInputs,
        idx: &[usize],
    ) -> Result<(Var, Option<Var>)> {
        let x = inputs.batch_signals(idx, self.config.in_channels, self.config.input_len)?;
        let x = tape.leaf(x, false);
        if self.config.feature_dim == 0 {
            return Ok((x, None));
        }
        if inputs.features.cols != self.config.feature_dim {
            return Err(Error::ShapeMismatch {
                expected: vec![inputs.len(), self.config.feature_dim],
                got: vec![inputs.features.rows, inputs.features.cols],
            });
        }
        let f = tape.leaf(inputs.batch_features(idx), false);
        Ok((x, Some(f)))
    }

    /// Eval-mode forward over the given records.
    pub fn predict(&self, inputs: &ModelInputs, idx: &[usize], keep_maps: bool) -> Result<Prediction> {
        let k = self.config.classes;
        let d = self.config.latent_dim();
        let mut logits = Vec::with_capacity(idx.len() * k);
        let mut g = Vec::with_capacity(idx.len() * d);
        let mut maps = keep_maps.then(Vec::new);
        for chunk in idx.chunks(EVAL_BATCH) {
            let mut tape = Tape::new();
            let p = self.store.bind(&mut tape, false);
            let (x, f) = self.batch_leaves(&mut tape, inputs, chunk)?;
            let lens = self.latent_lengths(inputs, chunk);
            let out = self.forward(&mut tape, &p, x, f, Some(&lens), None)?;
            logits.extend_from_slice(tape.value(out.logits).data());
            g.extend_from_slice(tape.value(out.g).data());
            if let Some(m) = maps.as_mut() {
                let a = tape.value(out.feature_maps);
                let t = self.config.latent_len();
                for b in 0..chunk.len() {
                    let slice = &a.data()[b * d * t..(b + 1) * d * t];
                    m.push(Matrix::from_vec(d, t, slice.to_vec())?);
                }
            }
        }
        Ok(Prediction {
            logits: Matrix::from_vec(idx.len(), k, logits)?,
            g: Matrix::from_vec(idx.len(), d, g)?,
            feature_maps: maps,
        })
    }

    /// Folds a training batch's statistics into the running estimates.
    pub fn update_running_stats(&mut self, stats: &BatchStats) -> Result<()> {
        self.store.update_running_stats(BN, stats)
    }

    /// The output layer's `classes x (feature_dim + latent_dim)` weights.
    pub fn fc_weights(&self) -> Result<Matrix> {
        let w = self.store.get(&format!("{FC}.weight"))?;
        Matrix::from_vec(w.shape()[0], w.shape()[1], w.data().to_vec())
    }

    /// Row of the classifier for class `c`, `feature_dim + latent_dim` long.
    pub fn fc_row(&self, c: usize) -> Result<Vec<f64>> {
        let w = self.store.get(&format!("{FC}.weight"))?;
        let cols = w.shape()[1];
        if c >= w.shape()[0] {
            return Err(Error::invalid(format!("class {c} outside 0..{}", w.shape()[0])));
        }
        Ok(w.data()[c * cols..(c + 1) * cols].to_vec())
    }
}
