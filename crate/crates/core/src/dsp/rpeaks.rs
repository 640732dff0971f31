//! Pan–Tompkins style QRS detection.
//!
//! Band-pass 5–20 Hz, five-point derivative, squaring, 150 ms moving-window
//! integration, then dual adaptive thresholds with search-back. Detections
//! are moved to the raw-signal maximum within ±75 ms and thinned with a
//! 200 ms refractory period.

use crate::dsp::filter::{filter_zero_phase, fir_bandpass, moving_average};
use crate::error::{Error, Result};

const REFRACTORY_S: f64 = 0.2;
const INTEGRATION_S: f64 = 0.15;
const REFINE_S: f64 = 0.075;

pub fn detect_r_peaks(ecg: &[f64], fs: f64) -> Result<Vec<usize>> {
    if fs < 50.0 {
        return Err(Error::invalid(format!("R-peak detection needs fs >= 50 Hz, got {fs}")));
    }
    if (ecg.len() as f64) < fs {
        return Err(Error::invalid(format!(
            "signal of {} samples shorter than one second",
            ecg.len()
        )));
    }
    let taps = {
        let t = (0.6 * fs).round() as usize;
        t | 1
    };
    let band = filter_zero_phase(ecg, &fir_bandpass(5.0, 20.0, fs, taps)?);
    let n = band.len();
    let at = |i: isize| band[i.clamp(0, n as isize - 1) as usize];
    let squared: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (-at(i - 2) - 2.0 * at(i - 1) + 2.0 * at(i + 1) + at(i + 2)) / 8.0;
            d * d
        })
        .collect();
    let integrated = moving_average(&squared, ((INTEGRATION_S * fs).round() as usize).max(1));

    let refractory = (REFRACTORY_S * fs).round() as usize;
    let candidates = local_maxima(&integrated, refractory);
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    let learn = (2.0 * fs) as usize;
    let head = &integrated[..learn.min(n)];
    let mut spki = 0.5 * head.iter().cloned().fold(0.0, f64::max);
    let mut npki = 0.5 * head.iter().sum::<f64>() / head.len() as f64;
    let mut qrs: Vec<usize> = Vec::new();
    let mut rr_avg: Option<f64> = None;
    let mut last_checked = 0usize;

    for (ci, &c) in candidates.iter().enumerate() {
        let pk = integrated[c];
        let thr1 = npki + 0.25 * (spki - npki);

        // search back over skipped candidates when a beat seems missing
        if let (Some(&last), Some(rr)) = (qrs.last(), rr_avg) {
            if (c - last) as f64 > 1.66 * rr {
                let thr2 = 0.5 * thr1;
                let best = candidates[last_checked..ci]
                    .iter()
                    .copied()
                    .filter(|&j| j > last + refractory && j + refractory < c)
                    .filter(|&j| integrated[j] > thr2)
                    .max_by(|&a, &b| integrated[a].total_cmp(&integrated[b]));
                if let Some(j) = best {
                    spki = 0.25 * integrated[j] + 0.75 * spki;
                    qrs.push(j);
                }
            }
        }

        if pk > thr1 {
            match qrs.last() {
                Some(&last) if c - last < refractory => {
                    if pk > integrated[last] {
                        *qrs.last_mut().unwrap() = c;
                    }
                }
                _ => qrs.push(c),
            }
            spki = 0.125 * pk + 0.875 * spki;
            if qrs.len() >= 2 {
                let recent: Vec<f64> = qrs
                    .windows(2)
                    .rev()
                    .take(8)
                    .map(|w| (w[1] - w[0]) as f64)
                    .collect();
                rr_avg = Some(recent.iter().sum::<f64>() / recent.len() as f64);
            }
        } else {
            npki = 0.125 * pk + 0.875 * npki;
        }
        last_checked = ci;
    }

    let half = (REFINE_S * fs).round() as usize;
    let mut refined: Vec<usize> = qrs
        .iter()
        .map(|&c| {
            let lo = c.saturating_sub(half);
            let hi = (c + half + 1).min(n);
            (lo..hi).max_by(|&a, &b| ecg[a].total_cmp(&ecg[b]).then(b.cmp(&a))).unwrap()
        })
        .collect();
    refined.sort_unstable();
    let mut out: Vec<usize> = Vec::with_capacity(refined.len());
    for p in refined {
        match out.last() {
            Some(&last) if p - last < refractory => {
                if ecg[p] > ecg[last] {
                    *out.last_mut().unwrap() = p;
                }
            }
            _ => out.push(p),
        }
    }
    Ok(out)
}

/// Strictly positive local maxima, keeping only the larger of any two closer
/// than `min_gap`.
fn local_maxima(y: &[f64], min_gap: usize) -> Vec<usize> {
    let n = y.len();
    let mut out: Vec<usize> = Vec::new();
    for i in 0..n {
        let left = if i == 0 { f64::NEG_INFINITY } else { y[i - 1] };
        let right = if i + 1 == n { f64::NEG_INFINITY } else { y[i + 1] };
        if y[i] > 0.0 && y[i] > left && y[i] >= right {
            match out.last() {
                Some(&last) if i - last < min_gap => {
                    if y[i] > y[last] {
                        *out.last_mut().unwrap() = i;
                    }
                }
                _ => out.push(i),
            }
        }
    }
    out
}
