use crate::dsp::std_dev;
use crate::error::{Error, Result};

pub const DEFAULT_M: usize = 2;
pub const DEFAULT_R: f64 = 0.2;
pub const DEFAULT_SCALES: [usize; 3] = [1, 2, 3];

/// Sample entropy `-ln(A/B)`.
///
/// `r` is a fraction of the series' (population) standard deviation. `B`
/// counts pairs of length-`m` templates within tolerance under the Chebyshev
/// distance, `A` those that still match at length `m+1`; both use the same
/// `len - m` starting points and exclude self-matches. Returns `Ok(None)` when
/// either count is zero.
pub fn sample_entropy(series: &[f64], m: usize, r: f64) -> Result<Option<f64>> {
    if m == 0 {
        return Err(Error::invalid("template length m must be >= 1"));
    }
    if series.len() < m + 2 {
        return Err(Error::invalid(format!(
            "series of length {} too short for m={m}",
            series.len()
        )));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("tolerance fraction r={r} must be > 0")));
    }
    let tol = r * std_dev(series);
    let n_templates = series.len() - m;
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..n_templates {
        for j in i + 1..n_templates {
            if (0..m).all(|k| (series[i + k] - series[j + k]).abs() <= tol) {
                b += 1;
                if (series[i + m] - series[j + m]).abs() <= tol {
                    a += 1;
                }
            }
        }
    }
    if a == 0 || b == 0 {
        return Ok(None);
    }
    Ok(Some(-((a as f64) / (b as f64)).ln()))
}

/// Non-overlapping means of length `scale`; a trailing partial block is
/// dropped.
pub fn coarse_grain(series: &[f64], scale: usize) -> Vec<f64> {
    series
        .chunks_exact(scale)
        .map(|c| c.iter().sum::<f64>() / scale as f64)
        .collect()
}

/// Sample entropy of the coarse-grained series at each scale, in the order
/// the scales are given. Undefined scales are `None`.
pub fn multiscale_entropy(
    series: &[f64],
    scales: &[usize],
    m: usize,
    r: f64,
) -> Result<Vec<Option<f64>>> {
    let max_scale = scales.iter().copied().max().unwrap_or(0);
    if scales.contains(&0) {
        return Err(Error::invalid("scales must be >= 1"));
    }
    if max_scale * (m + 2) > series.len() {
        return Err(Error::invalid(format!(
            "series of length {} too short for scale {max_scale} with m={m}",
            series.len()
        )));
    }
    scales
        .iter()
        .map(|&s| sample_entropy(&coarse_grain(series, s), m, r))
        .collect()
}
