//! Auxiliary probe tasks: relevance of the features to the label,
//! independence of the learned representation from the features, and how
//! much label information the representation alone still carries.

mod auxnet;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

pub use auxnet::{AuxNet, AuxNetConfig};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{classification_metrics, Metrics};
use crate::signal::{upsample_minority_indices, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub accuracy: f64,
    pub f1: Option<f64>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub avg_r2: f64,
    /// `None` for dimensions excluded for zero variance.
    pub per_dim: Vec<Option<f64>>,
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rep2LabelReport {
    pub accuracy: f64,
    pub fold_accuracy: Vec<f64>,
    pub correct: usize,
    pub n: usize,
    /// Exact binomial p-value against 0.5.
    pub p_chance: f64,
    /// Exact binomial p-value against the majority-class rate.
    pub majority_rate: f64,
    pub p_majority: f64,
}

fn split_rows(splits: &[Split], which: Split) -> Vec<usize> {
    (0..splits.len()).filter(|&i| splits[i] == which).collect()
}

fn check_rows(what: &str, m: &Matrix, n: usize) -> Result<()> {
    if m.rows != n {
        return Err(Error::invalid(format!("{what} has {} rows, expected {n}", m.rows)));
    }
    Ok(())
}

/// Probe classifier from the features straight to the label, trained on the
/// training split (optionally minority-upsampled) and scored on the test
/// split.
pub fn relevance_task(
    features: &Matrix,
    labels: &[usize],
    splits: &[Split],
    k: usize,
    upsample_ratio: Option<f64>,
    cfg: &AuxNetConfig,
) -> Result<RelevanceReport> {
    check_rows("feature matrix", features, labels.len())?;
    if splits.len() != labels.len() {
        return Err(Error::invalid("one split tag per record is required"));
    }
    let mut train = split_rows(splits, Split::Train);
    let test = split_rows(splits, Split::Test);
    for (name, idx) in [("training", &train), ("test", &test)] {
        let first = idx.first().map(|&i| labels[i]);
        if idx.iter().all(|&i| Some(labels[i]) == first) {
            return Err(Error::Data(format!("{name} split holds a single class")));
        }
    }
    if let Some(ratio) = upsample_ratio {
        let tl: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        train = upsample_minority_indices(&tl, ratio, cfg.seed)?
            .into_iter()
            .map(|j| train[j])
            .collect();
    }
    let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let net = AuxNet::fit_classifier(&features.select_rows(&train), &y, k, cfg)?;
    let pred = net.predict_labels(&features.select_rows(&test))?;
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let metrics = classification_metrics(&truth, &pred, k, None)?;
    Ok(RelevanceReport {
        accuracy: metrics.accuracy,
        f1: metrics.f1_positive,
        metrics,
    })
}

/// `1 - SS_res / SS_tot`; negative when worse than predicting the mean.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || truth.len() < 2 {
        return Err(Error::invalid(format!(
            "r_squared needs equal lengths of at least 2, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::Numerical("r_squared: truth has zero variance".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len().max(1) as f64
}

/// Multi-task regression from `g` to every feature dimension; held-out R²
/// averaged over the dimensions with variance on both splits.
pub fn independence_task(
    g: &Matrix,
    features: &Matrix,
    splits: &[Split],
    cfg: &AuxNetConfig,
) -> Result<IndependenceReport> {
    check_rows("feature matrix", features, g.rows)?;
    if splits.len() != g.rows {
        return Err(Error::invalid("one split tag per record is required"));
    }
    let train = split_rows(splits, Split::Train);
    let test = split_rows(splits, Split::Test);
    if test.len() < 2 {
        return Err(Error::Data("independence task needs at least 2 test records".into()));
    }
    let (ftr, fte) = (features.select_rows(&train), features.select_rows(&test));
    let keep: Vec<usize> = (0..features.cols)
        .filter(|&d| {
            let ok = variance(&ftr.column(d)) > 1e-12 && variance(&fte.column(d)) > 1e-12;
            if !ok {
                warn!("independence task: feature dimension {d} has zero variance and is excluded");
            }
            ok
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Data("every feature dimension has zero variance".into()));
    }
    let excluded: Vec<usize> = (0..features.cols).filter(|d| !keep.contains(d)).collect();
    let ytr = ftr.select_cols(&keep);
    let yte = fte.select_cols(&keep);
    let net = AuxNet::fit_regressor(&g.select_rows(&train), &ytr, cfg)?;
    let pred = net.predict(&g.select_rows(&test))?;
    let mut per_dim = vec![None; features.cols];
    for (j, &d) in keep.iter().enumerate() {
        per_dim[d] = Some(r_squared(&pred.column(j), &yte.column(j))?);
    }
    let avg_r2 = per_dim.iter().flatten().sum::<f64>() / keep.len() as f64;
    Ok(IndependenceReport {
        avg_r2,
        per_dim,
        excluded,
    })
}

/// Stratified fold index per row: each class is shuffled and dealt round
/// robin.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("at least 2 folds are required"));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    let mut offset = 0;
    for c in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < folds {
            return Err(Error::Data(format!(
                "class {c} has {} records, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            out[i] = (j + offset) % folds;
        }
        offset += 1;
    }
    Ok(out)
}

/// Cross-validated probe classifier from `g` to the label on the test
/// split alone.
pub fn rep2label_task(
    g: &Matrix,
    labels: &[usize],
    k: usize,
    folds: usize,
    cfg: &AuxNetConfig,
) -> Result<Rep2LabelReport> {
    check_rows("representation", g, labels.len())?;
    let fold_of = stratified_folds(labels, folds, cfg.seed)?;
    let mut fold_accuracy = Vec::with_capacity(folds);
    let mut correct = 0;
    for fold in 0..folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == fold).collect();
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let net = AuxNet::fit_classifier(&g.select_rows(&train), &y, k, cfg)?;
        let pred = net.predict_labels(&g.select_rows(&test))?;
        let hits = test.iter().zip(&pred).filter(|(&i, &p)| labels[i] == p).count();
        correct += hits;
        fold_accuracy.push(hits as f64 / test.len() as f64);
    }
    let n = labels.len();
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let majority_rate = *counts.iter().max().unwrap_or(&0) as f64 / n as f64;
    Ok(Rep2LabelReport {
        accuracy: fold_accuracy.iter().sum::<f64>() / folds as f64,
        fold_accuracy,
        correct,
        n,
        p_chance: binomial_chance_test(correct, n, 0.5)?,
        majority_rate,
        p_majority: binomial_chance_test(correct, n, majority_rate)?,
    })
}

/// Exact two-sided binomial test: total probability of every outcome no
/// more likely than the observed one.
pub fn binomial_chance_test(correct: usize, n: usize, p0: f64) -> Result<f64> {
    if correct > n {
        return Err(Error::invalid(format!("{correct} successes out of {n}")));
    }
    let dist = Binomial::new(p0, n as u64)
        .map_err(|e| Error::invalid(format!("binomial p0 {p0}: {e}")))?;
    let observed = dist.pmf(correct as u64) * (1.0 + 1e-7);
    let p: f64 = (0..=n as u64)
        .map(|i| dist.pmf(i))
        .filter(|&q| q <= observed)
        .sum();
    Ok(p.min(1.0))
}
