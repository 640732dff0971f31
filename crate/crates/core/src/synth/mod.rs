//! Labelled synthetic ECG-like and EEG-like records with exact landmark
//! positions.

mod ecg;
mod eeg;

pub use ecg::{gen_ecg_like, EcgSynthParams, QRS_WIDTH_S};
pub use eeg::{gen_eeg_like, BandMixture, EegSynthParams, EOG_CHANNEL};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::events::EventList;
use crate::signal::SignalRecord;

/// Landmarks planted in one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub record_id: String,
    pub events: Vec<EventList>,
}

impl GroundTruth {
    pub fn of_kind(&self, kind: crate::events::EventKind) -> Option<&EventList> {
        self.events.iter().find(|e| e.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub records: Vec<SignalRecord>,
    pub truth: Vec<GroundTruth>,
}

impl SynthDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }
}

/// Generator for record `index`: independent of how many records precede it.
pub(crate) fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Exactly `round(n * fraction)` ones, in seeded random order.
pub(crate) fn balanced_labels(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let ones = (n as f64 * fraction).round() as usize;
    let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i < ones)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    labels.shuffle(&mut rng);
    labels
}

fn gaussian_bump(x: &mut [f64], centre: f64, sigma: f64, amp: f64) {
    let lo = (centre - 4.0 * sigma).floor().max(0.0) as usize;
    let hi = ((centre + 4.0 * sigma).ceil().max(0.0) as usize).min(x.len());
    for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
        let z = (i as f64 - centre) / sigma;
        *v += amp * (-0.5 * z * z).exp();
    }
}
