use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification quality on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    /// Per-class F1; `None` when the class does not occur in the labels.
    pub f1: Vec<Option<f64>>,
    pub positive_class: usize,
    /// F1 of `positive_class`.
    pub f1_positive: Option<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// The least frequent class; ties go to the higher index.
pub fn minority_class(labels: &[usize], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l < k {
            counts[l] += 1;
        }
    }
    (0..k).fold(k - 1, |best, c| if counts[c] < counts[best] { c } else { best })
}

/// Accuracy, per-class F1 and the confusion matrix. `positive_class`
/// defaults to the minority class of `truth`.
pub fn classification_metrics(
    truth: &[usize],
    predicted: &[usize],
    k: usize,
    positive_class: Option<usize>,
) -> Result<Metrics> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::invalid(format!("label {t} or prediction {p} outside 0..{k}")));
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let f1 = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let fn_: usize = confusion[c].iter().sum::<usize>() - tp;
            let fp: usize = (0..k).map(|t| confusion[t][c]).sum::<usize>() - tp;
            if tp + fn_ == 0 {
                None
            } else {
                Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
            }
        })
        .collect::<Vec<_>>();
    let positive_class = positive_class.unwrap_or_else(|| minority_class(truth, k));
    if positive_class >= k {
        return Err(Error::invalid(format!("positive class {positive_class} outside 0..{k}")));
    }
    Ok(Metrics {
        n: truth.len(),
        accuracy: correct as f64 / truth.len() as f64,
        f1_positive: f1[positive_class],
        f1,
        positive_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 1, 0];
        let m = classification_metrics(&y, &y, 2, None).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn hand_confusion_matrix() {
        // TP=2, FP=1, FN=1, TN=6 for class 1
        let truth = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let pred = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0];
        let m = classification_metrics(&truth, &pred, 2, Some(1)).unwrap();
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.f1_positive.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.confusion, vec![vec![6, 1], vec![1, 2]]);
    }

    #[test]
    fn constant_predictor_on_balanced_split() {
        let truth = [0, 1, 0, 1, 0, 1];
        let m = classification_metrics(&truth, &[0; 6], 2, None).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.positive_class, 1);
        assert_eq!(m.f1_positive, Some(0.0));
    }

    #[test]
    fn absent_class_f1_is_undefined() {
        let m = classification_metrics(&[0, 0], &[0, 1], 2, Some(1)).unwrap();
        assert_eq!(m.f1[1], None);
        assert_eq!(m.f1_positive, None);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("null"));
    }

    #[test]
    fn minority_is_least_frequent() {
        assert_eq!(minority_class(&[0, 0, 1], 2), 1);
        assert_eq!(minority_class(&[1, 1, 0], 2), 0);
        assert_eq!(minority_class(&[], 3), 2);
    }
}
