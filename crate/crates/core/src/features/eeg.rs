//! EEG band-power features and the slow-wave and eye-movement detectors.

use crate::dsp::filter::{filter_zero_phase, fir_bandpass};
use crate::dsp::spectrum::default_segment_len;
use crate::dsp::{median, relative_bandpower, std_dev, welch_psd};
use crate::error::{Error, Result};
use crate::events::{EventKind, EventList};
use crate::features::FeatureVector;
use crate::signal::SignalRecord;

pub const EEG_BANDS: [(f64, f64); 4] = [(0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0)];
pub const EEG_NAMES: [&str; 4] = ["delta", "theta", "alpha", "beta"];

const SLOW_BAND: (f64, f64) = (0.5, 2.0);
const SLOW_MIN_S: f64 = 0.25;
const SLOW_MAX_S: f64 = 1.5;
const SLOW_THRESHOLD_STD: f64 = 1.5;
/// Band-pass length for the slow-wave filter, in seconds of signal.
const SLOW_FILTER_S: f64 = 4.0;

const REM_MAD_FACTOR: f64 = 4.0;
const REM_MIN_S: f64 = 0.05;
const REM_REFRACTORY_S: f64 = 0.3;

fn unpadded(record: &SignalRecord) -> &[f64] {
    &record.samples[..record.original_len().min(record.samples.len())]
}

/// Relative Delta, Theta, Alpha and Beta power from a Welch spectrum.
pub fn eeg_frequency_features(record: &SignalRecord) -> Result<FeatureVector> {
    let x = unpadded(record);
    if (x.len() as f64) < 4.0 * record.fs {
        return Err(Error::invalid(format!(
            "record {}: epoch of {:.2} s shorter than 4 s",
            record.id,
            x.len() as f64 / record.fs
        )));
    }
    let psd = welch_psd(x, record.fs, default_segment_len(x.len(), record.fs), 0.5)?;
    match relative_bandpower(&psd, &EEG_BANDS) {
        Ok(v) => Ok(FeatureVector::new(&record.id, "eeg_freq", &EEG_NAMES, v)),
        Err(Error::Numerical(_)) => Ok(FeatureVector::sentinel(&record.id, "eeg_freq", &EEG_NAMES)),
        Err(e) => Err(e),
    }
}

/// Negative half-waves of the 0.5–2 Hz band lasting 0.25–1.5 s whose trough
/// lies below `-1.5` times the standard deviation of the raw epoch. Each
/// event sits at the trough.
pub fn detect_slow_waves(record: &SignalRecord) -> Result<EventList> {
    let fs = record.fs;
    if fs < 50.0 {
        return Err(Error::invalid(format!("slow-wave detection needs fs >= 50 Hz, got {fs}")));
    }
    let x = unpadded(record);
    let taps = ((SLOW_FILTER_S * fs).round() as usize) | 1;
    let y = filter_zero_phase(x, &fir_bandpass(SLOW_BAND.0, SLOW_BAND.1, fs, taps)?);
    let threshold = -SLOW_THRESHOLD_STD * std_dev(x);
    let min_len = (SLOW_MIN_S * fs).round() as usize;
    let max_len = (SLOW_MAX_S * fs).round() as usize;

    let mut events = Vec::new();
    let mut i = 0;
    while i < y.len() {
        if y[i] >= 0.0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < y.len() && y[i] < 0.0 {
            i += 1;
        }
        // half-waves cut by the epoch edges have unknown duration
        if start == 0 || i == y.len() {
            continue;
        }
        let len = i - start;
        if len < min_len || len > max_len {
            continue;
        }
        let trough = (start..i).fold(start, |b, j| if y[j] < y[b] { j } else { b });
        if y[trough] < threshold {
            events.push(trough);
        }
    }
    Ok(EventList::new(EventKind::SlowWave, events))
}

/// Runs of at least 50 ms in which the first difference of the named
/// auxiliary channel keeps one sign and exceeds four median absolute
/// deviations. Onsets closer than 300 ms to the previous event are dropped.
pub fn detect_rapid_eye_movements(record: &SignalRecord, channel: &str) -> Result<EventList> {
    let eog = record.aux.get(channel).ok_or_else(|| {
        Error::Data(format!("record {}: missing aux channel {channel:?}", record.id))
    })?;
    let fs = record.fs;
    let n = record.original_len().min(eog.len());
    let x = &eog[..n];
    if n < 2 {
        return Ok(EventList::new(EventKind::Rem, Vec::new()));
    }
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&d);
    let mad = median(&d.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
    let threshold = REM_MAD_FACTOR * mad;
    let min_run = ((REM_MIN_S * fs).round() as usize).max(1);
    let refractory = (REM_REFRACTORY_S * fs).round() as usize;

    let mut events: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < d.len() {
        if d[i].abs() <= threshold {
            i += 1;
            continue;
        }
        let sign = d[i].signum();
        let start = i;
        while i < d.len() && d[i].abs() > threshold && d[i].signum() == sign {
            i += 1;
        }
        if i - start >= min_run && events.last().is_none_or(|&last| start >= last + refractory) {
            events.push(start);
        }
    }
    Ok(EventList::new(EventKind::Rem, events))
}
