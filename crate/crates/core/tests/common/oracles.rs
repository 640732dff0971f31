//! Brute-force reference implementations. Written from the textbook
//! definitions, without sharing code with the library.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| nd.sample(&mut rng)).collect()
}

pub fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new(0.0, 1.0).unwrap();
    (0..n).map(|_| u.sample(&mut rng)).collect()
}

/// Row-major n x d matrix of standard normals.
pub fn noise_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let flat = noise(n * d, seed);
    flat.chunks(d).map(|c| c.to_vec()).collect()
}

fn pop_std(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Ordered-pair match counts `(A, B)` for template lengths `m + 1` and `m`.
/// Both template lengths use the first `len - m` starting points.
pub fn template_matches(x: &[f64], m: usize, r: f64) -> (usize, usize) {
    let tol = r * pop_std(x);
    let starts = x.len() - m;
    let templates = |len: usize| -> Vec<Vec<f64>> { (0..starts).map(|i| x[i..i + len].to_vec()).collect() };
    let count = |t: &[Vec<f64>]| -> usize {
        let mut c = 0;
        for i in 0..t.len() {
            for j in 0..t.len() {
                if i != j {
                    let d = t[i].iter().zip(&t[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if d <= tol {
                        c += 1;
                    }
                }
            }
        }
        c
    };
    (count(&templates(m + 1)), count(&templates(m)))
}

/// Sample entropy by explicit template enumeration.
pub fn sample_entropy(x: &[f64], m: usize, r: f64) -> Option<f64> {
    let (a, b) = template_matches(x, m, r);
    if a == 0 || b == 0 {
        None
    } else {
        Some(-(a as f64 / b as f64).ln())
    }
}

pub fn coarse_grain(x: &[f64], tau: usize) -> Vec<f64> {
    (0..x.len() / tau)
        .map(|j| (0..tau).map(|i| x[j * tau + i]).sum::<f64>() / tau as f64)
        .collect()
}

pub fn multiscale_entropy(x: &[f64], scales: &[usize], m: usize, r: f64) -> Vec<Option<f64>> {
    scales.iter().map(|&s| sample_entropy(&coarse_grain(x, s), m, r)).collect()
}

/// Higuchi's curve-length estimator followed by an ordinary least-squares
/// fit of ln L(k) on ln(1/k).
pub fn higuchi_fd(x: &[f64], k_max: usize) -> Option<f64> {
    let n = x.len();
    let mut pts = Vec::new();
    for k in 1..=k_max {
        let mut lm = Vec::new();
        for m in 1..=k {
            let count = (n - m) / k;
            if count == 0 {
                continue;
            }
            let mut s = 0.0;
            for i in 1..=count {
                s += (x[m - 1 + i * k] - x[m - 1 + (i - 1) * k]).abs();
            }
            lm.push(s * (n - 1) as f64 / (count * k) as f64 / k as f64);
        }
        let l = lm.iter().sum::<f64>() / k as f64;
        if l > 0.0 {
            pts.push(((1.0 / k as f64).ln(), l.ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Pearson's r from raw sums.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let saa: f64 = a.iter().map(|v| v * v).sum();
    let sbb: f64 = b.iter().map(|v| v * v).sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

pub fn correlation_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|a| rows.iter().map(|b| pearson(a, b)).collect()).collect()
}

/// Welch PSD with a naive DFT: periodic Hann window, per-segment mean
/// removal, one-sided density scaling.
pub fn welch_psd(x: &[f64], fs: f64, seg: usize, overlap: f64) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = (0..seg).map(|i| (PI * i as f64 / seg as f64).sin().powi(2)).collect();
    let u: f64 = w.iter().map(|v| v * v).sum();
    let step = ((seg as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0;
    let mut s = 0;
    while s + seg <= x.len() {
        let part = &x[s..s + seg];
        let mean = part.iter().sum::<f64>() / seg as f64;
        for (k, a) in acc.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in part.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / seg as f64;
                re += (v - mean) * w[t] * ang.cos();
                im += (v - mean) * w[t] * ang.sin();
            }
            *a += re * re + im * im;
        }
        count += 1;
        s += step;
    }
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * fs / seg as f64).collect();
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let two = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
            two * p / (fs * u * count as f64)
        })
        .collect();
    (freqs, power)
}

pub fn relative_bandpower(freqs: &[f64], power: &[f64], bands: &[(f64, f64)]) -> Vec<f64> {
    let band = |lo: f64, hi: f64| -> f64 {
        freqs.iter().zip(power).filter(|(f, _)| **f >= lo && **f < hi).map(|(_, p)| p).sum()
    };
    let lo = bands.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let hi = bands.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    let total = band(lo, hi);
    bands.iter().map(|&(a, b)| band(a, b) / total).collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn gaussian_gram(x: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| {
            x.iter()
                .map(|b| (-a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / (sigma * sigma)).exp())
                .collect()
        })
        .collect()
}

/// tr(K H L H) / (n-1)^2 with every matrix formed explicitly.
pub fn hsic_trace(f: &[Vec<f64>], g: &[Vec<f64>], sigma_f: f64, sigma_g: f64) -> f64 {
    let n = f.len();
    let k = gaussian_gram(f, sigma_f);
    let l = gaussian_gram(g, sigma_g);
    let h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64).collect())
        .collect();
    let khlh = matmul(&matmul(&matmul(&k, &h), &l), &h);
    (0..n).map(|i| khlh[i][i]).sum::<f64>() / ((n - 1) as f64).powi(2)
}

/// Two-sided exact binomial p-value: total probability of outcomes no more
/// likely than the observed one. Probabilities from log-factorials.
pub fn binomial_two_sided(k: usize, n: usize, p: f64) -> f64 {
    let lf = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    let pmf = |i: usize| (lf(n) - lf(i) - lf(n - i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp();
    let obs = pmf(k);
    (0..=n).map(pmf).filter(|q| *q <= obs * (1.0 + 1e-7)).sum::<f64>().min(1.0)
}
