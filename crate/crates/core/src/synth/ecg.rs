use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{balanced_labels, gaussian_bump, record_rng, GroundTruth, SynthDataset};
use crate::error::{Error, Result};
use crate::events::{EventKind, EventList};
use crate::signal::{SignalRecord, META_ORIGINAL_LEN};

/// Nominal QRS width; beats are spaced at least three widths apart.
pub const QRS_WIDTH_S: f64 = 0.08;

const QRS_SIGMA_S: f64 = 0.015;
const P_CENTRE_S: f64 = 0.175;
const P_SIGMA_S: f64 = 0.022;
const T_CENTRE_S: f64 = 0.28;
const T_SIGMA_S: f64 = 0.05;
const WANDER_HZ: f64 = 0.3;

/// Class 0 beats regularly with a P-wave before each QRS; class 1 has
/// jittered intervals and (by default) no P-waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcgSynthParams {
    pub fs: f64,
    pub duration_s: f64,
    pub rr_mean: f64,
    /// Half-width of the uniform spread of a record's mean RR around `rr_mean`.
    pub rr_mean_spread: f64,
    pub rr_jitter_class0: f64,
    pub rr_jitter_class1: f64,
    pub pwave_present_class0: f64,
    pub pwave_present_class1: f64,
    pub pwave_amp: f64,
    pub qrs_amp: f64,
    pub twave_amp: f64,
    pub wander_amp: f64,
    pub noise_std: f64,
    /// Fraction of records labelled 1.
    pub class1_fraction: f64,
    pub seed: u64,
}

impl Default for EcgSynthParams {
    fn default() -> Self {
        Self {
            fs: 90.0,
            duration_s: 8.0,
            rr_mean: 0.8,
            rr_mean_spread: 0.15,
            rr_jitter_class0: 0.04,
            rr_jitter_class1: 0.06,
            pwave_present_class0: 1.0,
            pwave_present_class1: 0.0,
            pwave_amp: 0.25,
            qrs_amp: 1.0,
            twave_amp: 0.3,
            wander_amp: 0.1,
            noise_std: 0.05,
            class1_fraction: 0.5,
            seed: 1,
        }
    }
}

impl EcgSynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.fs > 0.0 && self.duration_s > 0.0) {
            return bad("ECG synth: fs and duration_s must be > 0".into());
        }
        if !(self.rr_mean - self.rr_mean_spread > 3.0 * QRS_WIDTH_S) {
            return bad(format!(
                "ECG synth: shortest mean RR {} s must exceed three QRS widths",
                self.rr_mean - self.rr_mean_spread
            ));
        }
        for (name, p) in [
            ("pwave_present_class0", self.pwave_present_class0),
            ("pwave_present_class1", self.pwave_present_class1),
            ("class1_fraction", self.class1_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("ECG synth: {name}={p} outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("rr_mean_spread", self.rr_mean_spread),
            ("rr_jitter_class0", self.rr_jitter_class0),
            ("rr_jitter_class1", self.rr_jitter_class1),
            ("pwave_amp", self.pwave_amp),
            ("qrs_amp", self.qrs_amp),
            ("twave_amp", self.twave_amp),
            ("wander_amp", self.wander_amp),
            ("noise_std", self.noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("ECG synth: {name}={v} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }
}

/// Records carry R-peak and P-wave onset landmarks (the latter as
/// `synthetic` events, only for beats that received a P-wave).
pub fn gen_ecg_like(n_records: usize, params: &EcgSynthParams) -> Result<SynthDataset> {
    params.validate()?;
    let labels = balanced_labels(n_records, params.class1_fraction, params.seed);
    let mut records = Vec::with_capacity(n_records);
    let mut truth = Vec::with_capacity(n_records);
    for (i, &label) in labels.iter().enumerate() {
        let (rec, gt) = one_record(i, label, params);
        records.push(rec);
        truth.push(gt);
    }
    Ok(SynthDataset { records, truth })
}

fn one_record(index: usize, label: usize, p: &EcgSynthParams) -> (SignalRecord, GroundTruth) {
    let mut rng = record_rng(p.seed, index);
    let fs = p.fs;
    let n = p.len();
    let (jitter, p_prob) = if label == 0 {
        (p.rr_jitter_class0, p.pwave_present_class0)
    } else {
        (p.rr_jitter_class1, p.pwave_present_class1)
    };
    let rr_rec = p.rr_mean + p.rr_mean_spread * (2.0 * rng.random::<f64>() - 1.0);
    let min_rr = 3.0 * QRS_WIDTH_S + P_CENTRE_S;
    let jitter_dist = Normal::new(0.0, jitter.max(1e-12)).expect("finite std");

    let mut x = vec![0.0; n];
    let mut peaks = Vec::new();
    let mut p_onsets = Vec::new();
    // first beat late enough for a full P-window before it
    let mut t = 0.3 + rng.random::<f64>() * rr_rec;
    let last = p.duration_s - 0.1;
    while t < last {
        let c = t * fs;
        gaussian_bump(&mut x, c, QRS_SIGMA_S * fs, p.qrs_amp);
        gaussian_bump(&mut x, c + T_CENTRE_S * fs, T_SIGMA_S * fs, p.twave_amp);
        if rng.random::<f64>() < p_prob {
            let pc = c - P_CENTRE_S * fs;
            gaussian_bump(&mut x, pc, P_SIGMA_S * fs, p.pwave_amp);
            p_onsets.push((pc - 2.0 * P_SIGMA_S * fs).round() as usize);
        }
        peaks.push(c.round() as usize);
        let step = if jitter > 0.0 {
            rr_rec + jitter_dist.sample(&mut rng)
        } else {
            rr_rec
        };
        t += step.clamp(min_rr, 2.0 * p.rr_mean);
    }

    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let noise = Normal::new(0.0, p.noise_std.max(1e-300)).expect("finite std");
    for (i, v) in x.iter_mut().enumerate() {
        *v += p.wander_amp * (std::f64::consts::TAU * WANDER_HZ * i as f64 / fs + phase).sin();
        if p.noise_std > 0.0 {
            *v += noise.sample(&mut rng);
        }
    }

    let id = format!("ecg{index:05}");
    let mut rec = SignalRecord::new(&id, x, fs, label);
    rec.meta.insert(META_ORIGINAL_LEN.into(), n.to_string());
    let truth = GroundTruth {
        record_id: id,
        events: vec![
            EventList::new(EventKind::RPeak, peaks),
            EventList::new(EventKind::Synthetic, p_onsets),
        ],
    };
    (rec, truth)
}
