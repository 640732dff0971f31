//! Signal-processing primitives used by the feature extractors and landmark
//! detectors.

pub mod correlation;
pub mod entropy;
pub mod filter;
pub mod fractal;
pub mod rpeaks;
pub mod spectrum;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use entropy::{multiscale_entropy, sample_entropy};
pub use fractal::higuchi_fd;
pub use rpeaks::detect_r_peaks;
pub use spectrum::{relative_bandpower, welch_psd, PowerSpectrum};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation (1/n).
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Median; the mean of the two central values for even lengths.
pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
