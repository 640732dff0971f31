use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    /// Bin centres in Hz, 0 to fs/2.
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub power: Vec<f64>,
    pub fs: f64,
}

impl PowerSpectrum {
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            self.fs
        }
    }

    /// Integrated power over `lo <= f < hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.df();
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df()
    }
}

/// Default Welch segment: four seconds, capped at the signal length.
pub fn default_segment_len(len: usize, fs: f64) -> usize {
    ((4.0 * fs).round() as usize).min(len).max(1)
}

/// Welch's averaged periodogram with a Hann window and per-segment mean
/// removal. Scaling is density-style so that `sum(power) * df` approximates
/// the variance of the input.
pub fn welch_psd(
    samples: &[f64],
    fs: f64,
    segment_len: usize,
    overlap_frac: f64,
) -> Result<PowerSpectrum> {
    if segment_len == 0 || segment_len > samples.len() {
        return Err(Error::invalid(format!(
            "segment length {segment_len} not in 1..={}",
            samples.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(Error::invalid(format!("overlap {overlap_frac} outside [0, 1)")));
    }
    if !(fs > 0.0) {
        return Err(Error::invalid("fs must be positive"));
    }
    let n = segment_len;
    let window: Vec<f64> = if n == 1 {
        vec![1.0]
    } else {
        // periodic Hann
        (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
    };
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let step = ((n as f64) * (1.0 - overlap_frac)).round().max(1.0) as usize;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let n_bins = n / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= samples.len() {
        let seg = &samples[start..start + n];
        let m = seg.iter().sum::<f64>() / n as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - m) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * win_energy * segments as f64);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    Ok(PowerSpectrum { freqs, power, fs })
}

/// Fraction of power in each band relative to the range the bands cover
/// (lowest lower edge to highest upper edge). Bands are half-open `[lo, hi)`.
pub fn relative_bandpower(psd: &PowerSpectrum, bands: &[(f64, f64)]) -> Result<Vec<f64>> {
    if bands.is_empty() {
        return Err(Error::invalid("no bands given"));
    }
    let nyq = psd.fs / 2.0;
    for &(lo, hi) in bands {
        if !(lo >= 0.0 && hi > lo && hi <= nyq) {
            return Err(Error::invalid(format!(
                "band [{lo}, {hi}) invalid for Nyquist {nyq} Hz"
            )));
        }
    }
    let lo = bands.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let hi = bands.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    let total = psd.band_power(lo, hi);
    if !(total > 0.0) {
        return Err(Error::Numerical(format!(
            "zero total power in [{lo}, {hi}) Hz"
        )));
    }
    Ok(bands
        .iter()
        .map(|&(a, b)| (psd.band_power(a, b) / total).clamp(0.0, 1.0))
        .collect())
}
