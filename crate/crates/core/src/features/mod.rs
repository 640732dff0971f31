//! Hand-engineered feature sets and the landmark detectors used to align
//! activation maps.

pub mod ecg;
pub mod eeg;

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalRecord;

pub use ecg::{pwave_features, rr_features, rr_features_from_peaks, PWAVE_NAMES, RR_NAMES};
pub use eeg::{
    detect_rapid_eye_movements, detect_slow_waves, eeg_frequency_features, EEG_BANDS, EEG_NAMES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub record_id: String,
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub set_id: String,
    /// Set when some or all values are sentinel zeros for a degenerate record.
    #[serde(default)]
    pub imputed: bool,
}

impl FeatureVector {
    pub fn new(
        record_id: impl Into<String>,
        set_id: impl Into<String>,
        names: &[&str],
        values: Vec<f64>,
    ) -> Self {
        Self {
            record_id: record_id.into(),
            values,
            names: names.iter().map(|s| s.to_string()).collect(),
            set_id: set_id.into(),
            imputed: false,
        }
    }

    /// All-zero vector flagged as imputed.
    pub fn sentinel(record_id: impl Into<String>, set_id: impl Into<String>, names: &[&str]) -> Self {
        let mut v = Self::new(record_id, set_id, names, vec![0.0; names.len()]);
        v.imputed = true;
        v
    }

    pub fn empty(record_id: impl Into<String>) -> Self {
        Self::new(record_id, "", &[], Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.names.len() {
            return Err(Error::Data(format!(
                "record {}: {} values but {} names",
                self.record_id,
                self.values.len(),
                self.names.len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "record {}: feature {} is not finite",
                self.record_id, self.names[i]
            )));
        }
        let unique: BTreeSet<&String> = self.names.iter().collect();
        if unique.len() != self.names.len() {
            return Err(Error::Data(format!("record {}: duplicate feature names", self.record_id)));
        }
        Ok(())
    }
}

/// Appends `b` to `a`. Names of `b` that collide with `a` get `_<set_id>`
/// appended.
pub fn concat_features(a: &FeatureVector, b: &FeatureVector) -> Result<FeatureVector> {
    if a.record_id != b.record_id {
        return Err(Error::invalid(format!(
            "cannot concatenate features of {} and {}",
            a.record_id, b.record_id
        )));
    }
    if b.dim() == 0 {
        return Ok(a.clone());
    }
    if a.dim() == 0 {
        return Ok(b.clone());
    }
    let taken: BTreeSet<&String> = a.names.iter().collect();
    let mut names = a.names.clone();
    for n in &b.names {
        if taken.contains(n) {
            names.push(format!("{n}_{}", b.set_id));
        } else {
            names.push(n.clone());
        }
    }
    let mut values = a.values.clone();
    values.extend_from_slice(&b.values);
    Ok(FeatureVector {
        record_id: a.record_id.clone(),
        values,
        names,
        set_id: format!("{}+{}", a.set_id, b.set_id),
        imputed: a.imputed || b.imputed,
    })
}

/// Which external features accompany a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    None,
    Rr,
    Pwave,
    /// RR followed by P-wave features.
    RrPwave,
    EegFreq,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::None => "none",
            FeatureSet::Rr => "rr",
            FeatureSet::Pwave => "pwave",
            FeatureSet::RrPwave => "rr_pwave",
            FeatureSet::EegFreq => "eeg_freq",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            FeatureSet::None => 0,
            FeatureSet::Rr => RR_NAMES.len(),
            FeatureSet::Pwave => PWAVE_NAMES.len(),
            FeatureSet::RrPwave => RR_NAMES.len() + PWAVE_NAMES.len(),
            FeatureSet::EegFreq => EEG_NAMES.len(),
        }
    }

    pub fn extract(self, record: &SignalRecord) -> Result<FeatureVector> {
        match self {
            FeatureSet::None => Ok(FeatureVector::empty(&record.id)),
            FeatureSet::Rr => rr_features(record),
            FeatureSet::Pwave => pwave_features(record),
            FeatureSet::RrPwave => concat_features(&rr_features(record)?, &pwave_features(record)?),
            FeatureSet::EegFreq => eeg_frequency_features(record),
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FeatureSet::None),
            "rr" => Ok(FeatureSet::Rr),
            "pwave" => Ok(FeatureSet::Pwave),
            "rr_pwave" => Ok(FeatureSet::RrPwave),
            "eeg_freq" => Ok(FeatureSet::EegFreq),
            other => Err(Error::Config(format!("unknown feature set {other:?}"))),
        }
    }
}

/// Per-dimension z-scoring with statistics from the training split.
/// Dimensions with zero spread are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() {
            return Err(Error::invalid("cannot fit a standardizer on zero rows"));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("feature rows have unequal lengths"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.dim()],
                got: vec![row.len()],
            });
        }
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(id: &str, set: &str, names: &[&str]) -> FeatureVector {
        FeatureVector::new(id, set, names, (0..names.len()).map(|i| i as f64).collect())
    }

    #[test]
    fn concat_dims_and_order() {
        let a = FeatureVector::sentinel("r", "rr", &RR_NAMES);
        let b = FeatureVector::sentinel("r", "pwave", &PWAVE_NAMES);
        let c = concat_features(&a, &b).unwrap();
        assert_eq!(c.dim(), 15);
        assert_eq!(&c.names[..8], &a.names[..]);
        assert_eq!(c.set_id, "rr+pwave");
        c.validate().unwrap();
    }

    #[test]
    fn concat_with_empty_is_identity() {
        let a = fv("r", "rr", &["x", "y"]);
        assert_eq!(concat_features(&a, &FeatureVector::empty("r")).unwrap(), a);
    }

    #[test]
    fn concat_suffixes_collisions() {
        let a = fv("r", "a", &["x", "y"]);
        let b = fv("r", "b", &["y", "z"]);
        let c = concat_features(&a, &b).unwrap();
        assert_eq!(c.names, ["x", "y", "y_b", "z"]);
        c.validate().unwrap();
    }

    #[test]
    fn concat_rejects_different_records() {
        assert!(concat_features(&fv("r1", "a", &["x"]), &fv("r2", "b", &["y"])).is_err());
    }

    #[test]
    fn feature_set_round_trip() {
        for s in [
            FeatureSet::None,
            FeatureSet::Rr,
            FeatureSet::Pwave,
            FeatureSet::RrPwave,
            FeatureSet::EegFreq,
        ] {
            assert_eq!(s.as_str().parse::<FeatureSet>().unwrap(), s);
        }
        assert_eq!(FeatureSet::RrPwave.dim(), 15);
        assert_eq!(FeatureSet::EegFreq.dim(), 4);
    }

    #[test]
    fn standardizer_constant_column_is_centred() {
        let s = Standardizer::fit(&[vec![2.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(s.transform(&[2.0, 3.0]).unwrap(), vec![0.0, 1.0]);
        assert!(s.transform(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn standardized_training_rows_have_unit_moments(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..40)
        ) {
            let s = Standardizer::fit(&rows).unwrap();
            let z: Vec<Vec<f64>> = rows.iter().map(|r| s.transform(r).unwrap()).collect();
            for j in 0..3 {
                let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
                let m = crate::dsp::mean(&col);
                let sd = crate::dsp::std_dev(&col);
                prop_assert!(m.abs() < 1e-6);
                let raw: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                if crate::dsp::std_dev(&raw) > 1e-12 {
                    prop_assert!((sd - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
