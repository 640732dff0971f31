use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{balanced_labels, record_rng, GroundTruth, SynthDataset};
use crate::error::{Error, Result};
use crate::events::{EventKind, EventList};
use crate::features::EEG_BANDS;
use crate::signal::{SignalRecord, META_ORIGINAL_LEN};

/// Name of the eye-movement channel in `SignalRecord::aux`.
pub const EOG_CHANNEL: &str = "eog";

const SLOW_WAVE_S: f64 = 0.5;
const SPINDLE_S: f64 = 1.0;
const SPINDLE_HZ: f64 = 13.0;
const REM_RISE_S: f64 = 0.1;
const REM_DECAY_S: f64 = 0.5;
/// Minimum distance between injected events and from the epoch edges.
const EVENT_GAP_S: f64 = 1.0;

/// Relative power of the Delta, Theta, Alpha and Beta bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandMixture {
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BandMixture {
    fn weights(&self) -> [f64; 4] {
        [self.delta, self.theta, self.alpha, self.beta]
    }

    /// Weights scaled to sum to one.
    pub fn normalized(&self) -> Result<[f64; 4]> {
        let w = self.weights();
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("band mixture {w:?} has negative entries")));
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("band mixture sums to zero".into()));
        }
        Ok(w.map(|v| v / total))
    }
}

/// Label 0 is NREM-like (slow waves, spindles), label 1 REM-like (eye
/// movements in the EOG channel, faintly mirrored in the EEG).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EegSynthParams {
    pub fs: f64,
    pub epoch_s: f64,
    pub mixture_class0: BandMixture,
    pub mixture_class1: BandMixture,
    pub background_std: f64,
    /// Events per minute.
    pub slow_wave_rate: f64,
    /// Trough depth in units of `background_std`.
    pub slow_wave_amp: f64,
    pub spindle_rate: f64,
    pub spindle_amp: f64,
    pub rem_rate: f64,
    pub rem_eog_amp: f64,
    /// Fraction of each EOG deflection added to the EEG trace.
    pub rem_eeg_leak: f64,
    pub eog_noise_std: f64,
    pub class1_fraction: f64,
    pub seed: u64,
}

impl Default for EegSynthParams {
    fn default() -> Self {
        Self {
            fs: 80.0,
            epoch_s: 30.0,
            mixture_class0: BandMixture {
                delta: 0.6,
                theta: 0.2,
                alpha: 0.1,
                beta: 0.1,
            },
            mixture_class1: BandMixture {
                delta: 0.15,
                theta: 0.35,
                alpha: 0.2,
                beta: 0.3,
            },
            background_std: 1.0,
            slow_wave_rate: 6.0,
            slow_wave_amp: 3.0,
            spindle_rate: 4.0,
            spindle_amp: 1.0,
            rem_rate: 10.0,
            rem_eog_amp: 8.0,
            rem_eeg_leak: 0.1,
            eog_noise_std: 0.1,
            class1_fraction: 0.5,
            seed: 1,
        }
    }
}

impl EegSynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0 && self.epoch_s > 2.0 * EVENT_GAP_S) {
            return Err(Error::Config("EEG synth: fs must be > 0 and epoch_s > 2 s".into()));
        }
        if self.fs / 2.0 <= EEG_BANDS[3].1 {
            return Err(Error::Config(format!(
                "EEG synth: fs {} too low for the 30 Hz band edge",
                self.fs
            )));
        }
        self.mixture_class0.normalized()?;
        self.mixture_class1.normalized()?;
        for (name, v) in [
            ("background_std", self.background_std),
            ("slow_wave_rate", self.slow_wave_rate),
            ("slow_wave_amp", self.slow_wave_amp),
            ("spindle_rate", self.spindle_rate),
            ("spindle_amp", self.spindle_amp),
            ("rem_rate", self.rem_rate),
            ("rem_eog_amp", self.rem_eog_amp),
            ("rem_eeg_leak", self.rem_eeg_leak),
            ("eog_noise_std", self.eog_noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("EEG synth: {name}={v} must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.class1_fraction) {
            return Err(Error::Config("EEG synth: class1_fraction outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.epoch_s * self.fs).round() as usize
    }
}

pub fn gen_eeg_like(n_records: usize, params: &EegSynthParams) -> Result<SynthDataset> {
    params.validate()?;
    let labels = balanced_labels(n_records, params.class1_fraction, params.seed);
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(params.len());
    let mut records = Vec::with_capacity(n_records);
    let mut truth = Vec::with_capacity(n_records);
    for (i, &label) in labels.iter().enumerate() {
        let (rec, gt) = one_record(i, label, params, ifft.as_ref())?;
        records.push(rec);
        truth.push(gt);
    }
    Ok(SynthDataset { records, truth })
}

fn one_record(
    index: usize,
    label: usize,
    p: &EegSynthParams,
    ifft: &dyn rustfft::Fft<f64>,
) -> Result<(SignalRecord, GroundTruth)> {
    let mut rng = record_rng(p.seed, index);
    let fs = p.fs;
    let n = p.len();
    let mixture = if label == 0 { p.mixture_class0 } else { p.mixture_class1 };
    let mut eeg = coloured_noise(n, fs, &mixture.normalized()?, p.background_std, ifft, &mut rng);

    let per_epoch = |rate: f64| (rate * p.epoch_s / 60.0).round() as usize;
    let mut slow = Vec::new();
    let mut spindles = Vec::new();
    let mut rems = Vec::new();
    let mut eog = vec![0.0; n];
    if label == 0 {
        slow = event_positions(per_epoch(p.slow_wave_rate), n, fs, &mut rng);
        let half = (SLOW_WAVE_S * fs / 2.0).round() as isize;
        for &c in &slow {
            for k in -half..=half {
                let i = c as isize + k;
                if (0..n as isize).contains(&i) {
                    let phase = std::f64::consts::PI * (k + half) as f64 / (2 * half) as f64;
                    eeg[i as usize] -= p.slow_wave_amp * p.background_std * phase.sin();
                }
            }
        }
        spindles = event_positions(per_epoch(p.spindle_rate), n, fs, &mut rng);
        let half = (SPINDLE_S * fs / 2.0).round() as isize;
        for &c in &spindles {
            for k in -half..=half {
                let i = c as isize + k;
                if (0..n as isize).contains(&i) {
                    let env = 0.5 * (1.0 + (std::f64::consts::PI * k as f64 / half as f64).cos());
                    let osc = (std::f64::consts::TAU * SPINDLE_HZ * k as f64 / fs).sin();
                    eeg[i as usize] += p.spindle_amp * p.background_std * env * osc;
                }
            }
        }
    } else {
        rems = event_positions(per_epoch(p.rem_rate), n, fs, &mut rng);
        let rise = (REM_RISE_S * fs).round().max(1.0) as usize;
        for &onset in &rems {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for (i, v) in eog.iter_mut().enumerate().skip(onset) {
                let k = (i - onset) as f64;
                let shape = if i - onset <= rise {
                    k / rise as f64
                } else {
                    (-(k - rise as f64) / (REM_DECAY_S * fs)).exp()
                };
                *v += sign * p.rem_eog_amp * shape;
            }
        }
        for (e, d) in eeg.iter_mut().zip(&eog) {
            *e += p.rem_eeg_leak * d;
        }
    }
    if p.eog_noise_std > 0.0 {
        let noise = Normal::new(0.0, p.eog_noise_std).expect("finite std");
        eog.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }

    let id = format!("eeg{index:05}");
    let mut rec = SignalRecord::new(&id, eeg, fs, label);
    rec.aux.insert(EOG_CHANNEL.into(), eog);
    rec.meta.insert(META_ORIGINAL_LEN.into(), n.to_string());
    let truth = GroundTruth {
        record_id: id,
        events: vec![
            EventList::new(EventKind::SlowWave, slow),
            EventList::new(EventKind::Spindle, spindles),
            EventList::new(EventKind::Rem, rems),
        ],
    };
    Ok((rec, truth))
}

/// Gaussian noise whose power is split across the four EEG bands by
/// `weights`, scaled to standard deviation `std`.
fn coloured_noise(
    n: usize,
    fs: f64,
    weights: &[f64; 4],
    std: f64,
    ifft: &dyn rustfft::Fft<f64>,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let df = fs / n as f64;
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for (b, &(lo, hi)) in EEG_BANDS.iter().enumerate() {
        let bins: Vec<usize> = (1..n.div_ceil(2))
            .filter(|&k| {
                let f = k as f64 * df;
                f >= lo && f < hi
            })
            .collect();
        if bins.is_empty() {
            continue;
        }
        let amp = (weights[b] / bins.len() as f64).sqrt();
        for k in bins {
            let c = Complex::new(normal.sample(rng), normal.sample(rng)) * amp;
            spec[k] = c;
            spec[n - k] = c.conj();
        }
    }
    ifft.process(&mut spec);
    let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let sd = crate::dsp::std_dev(&x);
    if sd > 0.0 {
        x.iter().map(|v| v * std / sd).collect()
    } else {
        x
    }
}

/// `count` sorted positions at least `EVENT_GAP_S` from each other and from
/// the edges. Fewer are returned if the epoch cannot hold them all.
fn event_positions(count: usize, n: usize, fs: f64, rng: &mut impl Rng) -> Vec<usize> {
    let gap = (EVENT_GAP_S * fs).round() as usize;
    if n <= 2 * gap {
        return Vec::new();
    }
    let mut out: Vec<usize> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 1000 * (count + 1) {
        attempts += 1;
        let c = rng.random_range(gap..n - gap);
        if out.iter().all(|&o| o.abs_diff(c) >= gap) {
            out.push(c);
        }
    }
    out.sort_unstable();
    out
}
