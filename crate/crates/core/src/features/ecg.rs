//! RR-interval and P-wave feature sets.

use crate::dsp::entropy::{coarse_grain, sample_entropy, DEFAULT_M, DEFAULT_R, DEFAULT_SCALES};
use crate::dsp::fractal::DEFAULT_K_MAX;
use crate::dsp::{correlation_matrix, detect_r_peaks, higuchi_fd, mean, median, std_dev};
use crate::error::Result;
use crate::features::FeatureVector;
use crate::signal::SignalRecord;

pub const RR_NAMES: [&str; 8] = [
    "rr_median",
    "rr_std",
    "rr_rms",
    "rr_mse",
    "rr_min",
    "rr_max",
    "rr_pnn20",
    "rr_pnn50",
];

pub const PWAVE_NAMES: [&str; 7] = [
    "p_max",
    "p_std",
    "p_energy",
    "p_corr_median",
    "p_corr_std",
    "p_higuchi",
    "p_argmax_time",
];

/// P-window start, seconds before the R-peak.
pub const PWAVE_OFFSET_S: f64 = 0.25;
/// P-window length in seconds (250 ms to 100 ms before the peak).
pub const PWAVE_LEN_S: f64 = 0.15;

fn unpadded(record: &SignalRecord) -> &[f64] {
    &record.samples[..record.original_len().min(record.samples.len())]
}

pub fn rr_features(record: &SignalRecord) -> Result<FeatureVector> {
    let peaks = detect_r_peaks(unpadded(record), record.fs)?;
    rr_features_from_peaks(&record.id, &peaks, record.fs)
}

/// RR features from known peak positions. Fewer than three peaks yields the
/// sentinel vector.
pub fn rr_features_from_peaks(id: &str, peaks: &[usize], fs: f64) -> Result<FeatureVector> {
    if peaks.len() < 3 {
        return Ok(FeatureVector::sentinel(id, "rr", &RR_NAMES));
    }
    let rr: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) as f64 / fs).collect();
    Ok(FeatureVector::new(id, "rr", &RR_NAMES, rr_statistics(&rr)?))
}

/// The eight RR statistics of an interval sequence in seconds.
pub fn rr_statistics(rr: &[f64]) -> Result<Vec<f64>> {
    let rms = (rr.iter().map(|v| v * v).sum::<f64>() / rr.len() as f64).sqrt();
    let min = rr.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        median(rr),
        std_dev(rr),
        rms,
        short_series_mse(rr)?,
        min,
        max,
        pnn(rr, 20.0),
        pnn(rr, 50.0),
    ])
}

/// Mean sample entropy over the default scales at which the coarse-grained
/// series is long enough and the entropy is defined; 0 when none is.
fn short_series_mse(rr: &[f64]) -> Result<f64> {
    let mut vals = Vec::new();
    for &s in &DEFAULT_SCALES {
        let cg = coarse_grain(rr, s);
        if cg.len() < DEFAULT_M + 2 {
            continue;
        }
        if let Some(v) = sample_entropy(&cg, DEFAULT_M, DEFAULT_R)? {
            vals.push(v);
        }
    }
    Ok(if vals.is_empty() { 0.0 } else { mean(&vals) })
}

/// Fraction of successive RR differences larger than `ms` milliseconds.
pub fn pnn(rr: &[f64], ms: f64) -> f64 {
    if rr.len() < 2 {
        return 0.0;
    }
    let exceed = rr
        .windows(2)
        .filter(|w| ((w[1] - w[0]).abs() * 1e3) > ms + 1e-9)
        .count();
    exceed as f64 / (rr.len() - 1) as f64
}

pub fn pwave_features(record: &SignalRecord) -> Result<FeatureVector> {
    let x = unpadded(record);
    let peaks = detect_r_peaks(x, record.fs)?;
    Ok(pwave_features_from_peaks(&record.id, x, &peaks, record.fs))
}

/// Windows of `round(0.15 fs)` samples starting `round(0.25 fs)` before each
/// peak, keeping only those that lie wholly inside `x`.
pub fn pwave_windows(x: &[f64], peaks: &[usize], fs: f64) -> Vec<Vec<f64>> {
    let offset = (PWAVE_OFFSET_S * fs).round() as usize;
    let len = (PWAVE_LEN_S * fs).round() as usize;
    peaks
        .iter()
        .filter(|&&p| p >= offset && p - offset + len <= x.len())
        .map(|&p| x[p - offset..p - offset + len].to_vec())
        .collect()
}

pub fn pwave_features_from_peaks(id: &str, x: &[f64], peaks: &[usize], fs: f64) -> FeatureVector {
    let windows = pwave_windows(x, peaks, fs);
    if windows.len() < 2 || windows[0].len() < 4 {
        return FeatureVector::sentinel(id, "pwave", &PWAVE_NAMES);
    }
    let mut imputed = false;
    let stacked: Vec<f64> = windows.iter().flatten().copied().collect();
    let max = stacked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let energy = stacked.iter().map(|v| v * v).sum::<f64>() / stacked.len() as f64;

    let (corr_median, corr_std) = match correlation_matrix(&windows) {
        Ok(c) => {
            let upper = c.upper_triangle();
            (median(&upper), std_dev(&upper))
        }
        Err(_) => {
            imputed = true;
            (0.0, 0.0)
        }
    };

    let len = windows[0].len();
    let k_max = DEFAULT_K_MAX.min(len / 2);
    let fds: Vec<f64> = windows
        .iter()
        .filter_map(|w| higuchi_fd(w, k_max).ok().flatten())
        .collect();
    let fd = if fds.is_empty() {
        imputed = true;
        0.0
    } else {
        median(&fds)
    };

    let argmax_time = mean(
        &windows
            .iter()
            .map(|w| {
                let i = w
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, v)| if *v > w[best] { i } else { best });
                i as f64 / fs
            })
            .collect::<Vec<_>>(),
    );

    let mut fv = FeatureVector::new(
        id,
        "pwave",
        &PWAVE_NAMES,
        vec![max, std_dev(&stacked), energy, corr_median, corr_std, fd, argmax_time],
    );
    fv.imputed = imputed;
    fv
}
