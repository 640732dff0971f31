use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: usize = 10;

/// Higuchi fractal dimension: least-squares slope of `ln L(k)` against
/// `ln(1/k)` for `k = 1..=k_max`, where `L(k)` is the mean normalised curve
/// length over the `k` decimated sub-series. Scales with zero length are left
/// out of the fit; `None` when fewer than two scales remain (e.g. a constant
/// series).
pub fn higuchi_fd(series: &[f64], k_max: usize) -> Result<Option<f64>> {
    if k_max < 2 {
        return Err(Error::invalid(format!("k_max must be >= 2, got {k_max}")));
    }
    let n = series.len();
    if n < 2 * k_max {
        return Err(Error::invalid(format!(
            "series of length {n} too short for k_max={k_max}"
        )));
    }
    let mut xs = Vec::with_capacity(k_max);
    let mut ys = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut total = 0.0;
        for m in 0..k {
            let steps = (n - 1 - m) / k;
            if steps == 0 {
                continue;
            }
            let len: f64 = (1..=steps)
                .map(|i| (series[m + i * k] - series[m + (i - 1) * k]).abs())
                .sum();
            total += len * (n - 1) as f64 / (steps * k) as f64 / k as f64;
        }
        let lk = total / k as f64;
        if lk > 0.0 {
            xs.push((1.0 / k as f64).ln());
            ys.push(lk.ln());
        }
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(Some(sxy / sxx))
}
