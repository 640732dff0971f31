use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::matrix::Matrix;
use crate::nn::layers::{init_linear, linear};
use crate::nn::tape::softmax_rows;
use crate::nn::{Adam, AdamConfig, ParamStore, Tape, Tensor, Var};

/// Probe network: two ReLU hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuxNetConfig {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AuxNetConfig {
    fn default() -> Self {
        Self {
            hidden: [128, 128],
            epochs: 40,
            batch_size: 32,
            lr: 3e-4,
            seed: 0,
        }
    }
}

impl AuxNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "aux net hidden sizes, epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("aux net lr {} must be positive", self.lr)));
        }
        Ok(())
    }
}

enum Target<'a> {
    Classes(&'a [usize], usize),
    Values(&'a Matrix),
}

/// A fitted probe. Inputs are standardized with statistics of its
/// training rows.
#[derive(Debug, Clone)]
pub struct AuxNet {
    store: ParamStore,
    input: Standardizer,
    /// Target scaling of a regressor.
    output: Option<Standardizer>,
    out_dim: usize,
}

impl AuxNet {
    pub fn fit_classifier(x: &Matrix, labels: &[usize], k: usize, cfg: &AuxNetConfig) -> Result<Self> {
        if labels.len() != x.rows {
            return Err(Error::invalid(format!("{} rows but {} labels", x.rows, labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
        }
        Self::fit(x, Target::Classes(labels, k), cfg)
    }

    pub fn fit_regressor(x: &Matrix, y: &Matrix, cfg: &AuxNetConfig) -> Result<Self> {
        if y.rows != x.rows || y.cols == 0 {
            return Err(Error::invalid(format!(
                "{} input rows but a {}x{} target",
                x.rows, y.rows, y.cols
            )));
        }
        Self::fit(x, Target::Values(y), cfg)
    }

    fn fit(x: &Matrix, target: Target<'_>, cfg: &AuxNetConfig) -> Result<Self> {
        cfg.validate()?;
        if x.rows < 2 || x.cols == 0 {
            return Err(Error::invalid(format!("cannot fit a probe on a {}x{} input", x.rows, x.cols)));
        }
        let input = Standardizer::fit(&matrix_rows(x))?;
        let output = match target {
            Target::Values(y) => Some(Standardizer::fit(&matrix_rows(y))?),
            Target::Classes(..) => None,
        };
        let out_dim = match target {
            Target::Classes(_, k) => k,
            Target::Values(y) => y.cols,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut store = ParamStore::new();
        let [h1, h2] = cfg.hidden;
        init_linear(&mut store, &mut rng, "l1", x.cols, h1);
        init_linear(&mut store, &mut rng, "l2", h1, h2);
        init_linear(&mut store, &mut rng, "out", h2, out_dim);
        if matches!(target, Target::Values(_)) {
            // Zero heads keep regressions on identical targets identical.
            store.insert("out.weight".to_string(), Tensor::zeros(&[out_dim, h2]));
        }
        let mut net = Self {
            store,
            input,
            output,
            out_dim,
        };
        let xs = apply(&net.input, x)?;
        let ys = match (&net.output, &target) {
            (Some(s), Target::Values(y)) => Some(apply(s, y)?),
            _ => None,
        };
        let mut opt = Adam::new(AdamConfig::default());
        let mut order: Vec<usize> = (0..x.rows).collect();
        rng.set_stream(1);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let mut tape = Tape::new();
                let p = net.store.bind(&mut tape, true);
                let out = net.forward(&mut tape, &p, &xs.select_rows(batch))?;
                let loss = match target {
                    Target::Classes(labels, _) => {
                        let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                        tape.softmax_cross_entropy(out, &y)?
                    }
                    Target::Values(_) => {
                        let y = ys.as_ref().expect("regressor targets");
                        tape.mse(out, &y.select_rows(batch).data)?
                    }
                };
                if !tape.value(loss).item().is_finite() {
                    return Err(Error::Numerical("probe network loss became non-finite".into()));
                }
                tape.backward(loss)?;
                opt.step(&mut net.store, &p.grads(&tape), cfg.lr)?;
            }
        }
        Ok(net)
    }

    fn forward(&self, tape: &mut Tape, p: &crate::nn::Bound, x: &Matrix) -> Result<Var> {
        let xv = tape.leaf(Tensor::from_vec(&[x.rows, x.cols], x.data.clone())?, false);
        let h = linear(tape, p, "l1", xv)?;
        let h = tape.relu(h);
        let h = linear(tape, p, "l2", h)?;
        let h = tape.relu(h);
        linear(tape, p, "out", h)
    }

    /// Raw outputs: logits for a classifier, values for a regressor.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let xs = apply(&self.input, x)?;
        let mut tape = Tape::new();
        let p = self.store.bind(&mut tape, false);
        let out = self.forward(&mut tape, &p, &xs)?;
        let mut data = tape.value(out).data().to_vec();
        if let Some(s) = &self.output {
            for row in data.chunks_mut(self.out_dim) {
                for ((v, m), sc) in row.iter_mut().zip(&s.mean).zip(&s.scale) {
                    *v = *v * sc + m;
                }
            }
        }
        Matrix::from_vec(x.rows, self.out_dim, data)
    }

    pub fn predict_labels(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.predict(x)?;
        let probs = softmax_rows(&logits.data, logits.cols);
        Ok(probs
            .chunks(logits.cols)
            .map(|row| (0..row.len()).fold(0, |a, j| if row[j] > row[a] { j } else { a }))
            .collect())
    }
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows).map(|i| m.row(i).to_vec()).collect()
}

fn apply(s: &Standardizer, x: &Matrix) -> Result<Matrix> {
    let mut data = Vec::with_capacity(x.data.len());
    for i in 0..x.rows {
        data.extend(s.transform(x.row(i))?);
    }
    Matrix::from_vec(x.rows, x.cols, data)
}
