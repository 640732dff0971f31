//! Windowed-sinc FIR design and zero-phase application.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn hamming(n: usize, len: usize) -> f64 {
    if len == 1 {
        return 1.0;
    }
    0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn check_taps(taps: usize) -> Result<()> {
    if taps == 0 || taps % 2 == 0 {
        return Err(Error::invalid(format!(
            "FIR length must be odd and positive, got {taps}"
        )));
    }
    Ok(())
}

/// Hamming-windowed low-pass with unit DC gain. `cutoff` in Hz.
pub fn fir_lowpass(cutoff: f64, fs: f64, taps: usize) -> Result<Vec<f64>> {
    check_taps(taps)?;
    if !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::invalid(format!(
            "low-pass cutoff {cutoff} Hz outside (0, {}) Hz",
            fs / 2.0
        )));
    }
    let fc = cutoff / fs;
    let mid = (taps / 2) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| 2.0 * fc * sinc(2.0 * fc * (n as f64 - mid)) * hamming(n, taps))
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    Ok(h)
}

/// Band-pass as the difference of two low-passes, gain normalised to one at
/// the band centre.
pub fn fir_bandpass(lo: f64, hi: f64, fs: f64, taps: usize) -> Result<Vec<f64>> {
    check_taps(taps)?;
    if !(lo > 0.0 && hi > lo && hi < fs / 2.0) {
        return Err(Error::invalid(format!(
            "band [{lo}, {hi}] Hz invalid for fs {fs} Hz"
        )));
    }
    let mid = (taps / 2) as f64;
    let (f1, f2) = (lo / fs, hi / fs);
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let k = n as f64 - mid;
            (2.0 * f2 * sinc(2.0 * f2 * k) - 2.0 * f1 * sinc(2.0 * f1 * k)) * hamming(n, taps)
        })
        .collect();
    let fc = 0.5 * (f1 + f2);
    let gain: f64 = h
        .iter()
        .enumerate()
        .map(|(n, v)| v * (2.0 * PI * fc * (n as f64 - mid)).cos())
        .sum();
    if gain.abs() > 0.0 {
        h.iter_mut().for_each(|v| *v /= gain);
    }
    Ok(h)
}

/// Centred convolution with a symmetric odd-length kernel, so the output has
/// no group delay. The input is extended by edge replication.
pub fn filter_zero_phase(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let half = (h.len() / 2) as isize;
    let last = n as isize - 1;
    (0..n as isize)
        .map(|i| {
            h.iter()
                .enumerate()
                .map(|(j, &c)| {
                    let idx = (i + half - j as isize).clamp(0, last);
                    c * x[idx as usize]
                })
                .sum()
        })
        .collect()
}

/// Centred moving average of `width` samples (odd widths are symmetric).
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    if width <= 1 || n == 0 {
        return x.to_vec();
    }
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}
