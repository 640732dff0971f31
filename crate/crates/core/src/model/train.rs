use std::fmt::Write as _;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::lambda_schedule;
use super::metrics::{classification_metrics, Metrics};
use super::network::{ModelInputs, Network};
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::hsic::{median_heuristic, DEFAULT_MIN_BANDWIDTH, KernelConfig};
use crate::matrix::Matrix;
use crate::nn::tape::softmax_rows;
use crate::nn::{cosine_lr, Adam, Tape, Var};

/// A trained network plus everything needed to apply it to new records.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub standardizer: Standardizer,
    pub sigma_f: f64,
    pub sigma_g: f64,
    /// Number of completed epochs when the snapshot was taken.
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_ce: f64,
    pub train_hsic: f64,
    /// Mean λ over the epoch's batches.
    pub lambda: f64,
    pub train_accuracy: f64,
    pub val_ce: f64,
    pub val_accuracy: f64,
    pub val_f1: Option<f64>,
    pub sigma_g: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str =
        "epoch,train_ce,train_hsic,lambda,train_accuracy,val_ce,val_accuracy,val_f1,sigma_g,lr";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let f1 = e.val_f1.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                e.epoch,
                e.train_ce,
                e.train_hsic,
                e.lambda,
                e.train_accuracy,
                e.val_ce,
                e.val_accuracy,
                f1,
                e.sigma_g,
                e.lr
            );
        }
        s
    }

    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.val_accuracy).reduce(f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the highest validation accuracy (earliest on ties).
    pub best: Checkpoint,
    /// State after the last completed step.
    pub last: Checkpoint,
    pub log: TrainLog,
    /// Diagnostic when training stopped on a non-finite loss; `last` then
    /// holds the parameters from before the failing step.
    pub aborted: Option<String>,
}

/// Tape handles of the objective's parts.
pub struct Loss {
    pub total: Var,
    pub ce: Var,
    pub hsic: Option<Var>,
}

/// `ce + lambda * hsic`. The HSIC term is present only when `f` is given.
#[allow(clippy::too_many_arguments)]
pub fn composite_loss(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    g: Var,
    f: Option<&Matrix>,
    sigma_f: f64,
    sigma_g: f64,
    lambda: f64,
) -> Result<Loss> {
    let ce = tape.softmax_cross_entropy(logits, labels)?;
    let Some(f) = f else {
        return Ok(Loss {
            total: ce,
            ce,
            hsic: None,
        });
    };
    let hsic = tape.hsic(g, f, sigma_f, sigma_g)?;
    let scaled = tape.scale(hsic, lambda);
    let total = tape.add(ce, scaled)?;
    Ok(Loss {
        total,
        ce,
        hsic: Some(hsic),
    })
}

/// Fixed-σ bandwidth of the external features over the training set.
pub fn feature_bandwidth(features: &Matrix) -> Result<f64> {
    if features.cols == 0 {
        return Ok(1.0);
    }
    median_heuristic(features, DEFAULT_MIN_BANDWIDTH)
}

/// Mini-batch training with Adam and cosine annealing. Incomplete final
/// batches are dropped. Deterministic for a given config seed.
pub fn train(
    train: &ModelInputs,
    val: &ModelInputs,
    network: Network,
    standardizer: Standardizer,
) -> Result<TrainOutcome> {
    let cfg = network.config.clone();
    cfg.validate()?;
    let bs = cfg.batch_size;
    let steps_per_epoch = train.len() / bs;
    if steps_per_epoch == 0 {
        return Err(Error::Data(format!(
            "training split of {} records is smaller than one batch of {bs}",
            train.len()
        )));
    }
    if val.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let total_steps = steps_per_epoch * cfg.epochs;
    let use_hsic = cfg.feature_dim > 0;
    let sigma_f = feature_bandwidth(&train.features)?;
    let mut kernel = KernelConfig {
        bandwidth: 1.0,
        momentum: cfg.bandwidth_momentum,
        min_bandwidth: DEFAULT_MIN_BANDWIDTH,
    };
    let mut sigma_g_initialised = false;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut net = network;
    let mut opt = Adam::new(cfg.adam);
    let mut log = TrainLog::default();
    let snapshot = |net: &Network, sigma_g: f64, epoch: usize| Checkpoint {
        network: net.clone(),
        standardizer: standardizer.clone(),
        sigma_f,
        sigma_g,
        epoch,
    };
    let mut best = snapshot(&net, kernel.bandwidth, 0);
    let mut best_acc = f64::NEG_INFINITY;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut ce_sum, mut hsic_sum, mut lambda_sum, mut correct) = (0.0, 0.0, 0.0, 0usize);
        let mut lr = cfg.lr_max;
        for batch in order.chunks_exact(bs) {
            lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min)?;
            let mut tape = Tape::new();
            let p = net.store.bind(&mut tape, true);
            let (x, f) = net.batch_leaves(&mut tape, train, batch)?;
            let lens = net.latent_lengths(train, batch);
            let out = net.forward(&mut tape, &p, x, f, Some(&lens), Some(&mut rng))?;

            let gv = tape.value(out.g);
            let gm = Matrix::from_vec(gv.dim(0), gv.dim(1), gv.data().to_vec())?;
            let current = median_heuristic(&gm, kernel.min_bandwidth)?;
            if sigma_g_initialised {
                kernel.update(current);
            } else {
                kernel.bandwidth = current;
                sigma_g_initialised = true;
            }

            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let fb = use_hsic.then(|| train.features.select_rows(batch));
            let ce_var = tape.softmax_cross_entropy(out.logits, &labels)?;
            let hsic_var = match &fb {
                Some(f) => Some(tape.hsic(out.g, f, sigma_f, kernel.bandwidth)?),
                None => None,
            };
            let ce = tape.value(ce_var).item();
            let hsic = hsic_var.map(|h| tape.value(h).item()).unwrap_or(0.0);
            let lambda = if use_hsic {
                lambda_schedule(&cfg.lambda, epoch, ce, hsic.max(0.0))
            } else {
                0.0
            };
            let total = match hsic_var {
                Some(h) if lambda != 0.0 => {
                    let s = tape.scale(h, lambda);
                    tape.add(ce_var, s)?
                }
                _ => ce_var,
            };
            let total_value = tape.value(total).item();
            if !total_value.is_finite() {
                let msg = format!(
                    "non-finite loss {total_value} at epoch {epoch}, step {step} (ce {ce}, hsic {hsic}, lambda {lambda})"
                );
                warn!("{msg}");
                return Ok(TrainOutcome {
                    best,
                    last: snapshot(&net, kernel.bandwidth, epoch),
                    log,
                    aborted: Some(msg),
                });
            }
            let probs = softmax_rows(tape.value(out.logits).data(), cfg.classes);
            for (b, &y) in labels.iter().enumerate() {
                let row = &probs[b * cfg.classes..(b + 1) * cfg.classes];
                let pred = (0..row.len()).fold(0, |a, j| if row[j] > row[a] { j } else { a });
                correct += usize::from(pred == y);
            }

            tape.backward(total)?;
            let grads = p.grads(&tape);
            if let Err(e) = opt.step(&mut net.store, &grads, lr) {
                let msg = format!("epoch {epoch}, step {step}: {e}");
                warn!("{msg}");
                return Ok(TrainOutcome {
                    best,
                    last: snapshot(&net, kernel.bandwidth, epoch),
                    log,
                    aborted: Some(msg),
                });
            }
            if let Some(stats) = &out.bn_stats {
                net.update_running_stats(stats)?;
            }
            ce_sum += ce;
            hsic_sum += hsic;
            lambda_sum += lambda;
            step += 1;
        }

        let all_val: Vec<usize> = (0..val.len()).collect();
        let pred = net.predict(val, &all_val, false)?;
        let val_metrics = classification_metrics(&val.labels, &pred.predicted_labels(), cfg.classes, None)?;
        let entry = EpochLog {
            epoch: epoch + 1,
            train_ce: ce_sum / steps_per_epoch as f64,
            train_hsic: hsic_sum / steps_per_epoch as f64,
            lambda: lambda_sum / steps_per_epoch as f64,
            train_accuracy: correct as f64 / (steps_per_epoch * bs) as f64,
            val_ce: mean_cross_entropy(&pred.logits, &val.labels),
            val_accuracy: val_metrics.accuracy,
            val_f1: val_metrics.f1_positive,
            sigma_g: kernel.bandwidth,
            lr,
        };
        info!(
            "epoch {} train_ce {:.4} hsic {:.5} lambda {:.3} val_acc {:.4}",
            entry.epoch, entry.train_ce, entry.train_hsic, entry.lambda, entry.val_accuracy
        );
        if entry.val_accuracy > best_acc {
            best_acc = entry.val_accuracy;
            best = snapshot(&net, kernel.bandwidth, epoch + 1);
        }
        log.epochs.push(entry);
    }
    let last = snapshot(&net, kernel.bandwidth, cfg.epochs);
    Ok(TrainOutcome {
        best,
        last,
        log,
        aborted: None,
    })
}

fn mean_cross_entropy(logits: &Matrix, labels: &[usize]) -> f64 {
    let probs = softmax_rows(&logits.data, logits.cols);
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * logits.cols + y].max(1e-300).ln())
        .sum();
    total / labels.len().max(1) as f64
}

/// Accuracy, F1 and confusion matrix of a checkpoint on some records.
pub fn evaluate(checkpoint: &Checkpoint, data: &ModelInputs, positive_class: Option<usize>) -> Result<Metrics> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let pred = checkpoint.network.predict(data, &idx, false)?;
    classification_metrics(
        &data.labels,
        &pred.predicted_labels(),
        checkpoint.network.config.classes,
        positive_class,
    )
}
