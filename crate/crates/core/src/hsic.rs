//! Hilbert–Schmidt Independence Criterion with Gaussian kernels.
//!
//! The biased estimator `tr(K H L H) / (n-1)^2`, with `H = I - 11^T/n`, is
//! evaluated as `sum_ij Kc_ij * Lc_ij / (n-1)^2` on double-centred kernels,
//! which makes it exactly symmetric in its two arguments.

use serde::{Deserialize, Serialize};

use crate::dsp::median;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_MIN_BANDWIDTH: f64 = 1e-6;
/// Above this many rows the median heuristic runs on an evenly spaced subset.
pub const MEDIAN_SUBSAMPLE_LIMIT: usize = 20_000;
const MEDIAN_SUBSAMPLE_SIZE: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub bandwidth: f64,
    /// Weight on the previous bandwidth in the moving average.
    pub momentum: f64,
    pub min_bandwidth: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth: 1.0,
            momentum: DEFAULT_MOMENTUM,
            min_bandwidth: DEFAULT_MIN_BANDWIDTH,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_bandwidth > 0.0) {
            return Err(Error::Config("min_bandwidth must be > 0".into()));
        }
        if !(self.bandwidth >= self.min_bandwidth) {
            return Err(Error::Config(format!(
                "bandwidth {} below minimum {}",
                self.bandwidth, self.min_bandwidth
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        Ok(())
    }

    /// Moving-average update towards the current batch median.
    pub fn update(&mut self, current_median: f64) {
        self.bandwidth = update_bandwidth(
            self.bandwidth,
            current_median,
            self.momentum,
            self.min_bandwidth,
        );
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K_ij = exp(-||x_i - x_j||^2 / sigma^2)`, row-major `n x n`.
pub fn gaussian_kernel_matrix(x: &Matrix, sigma: f64) -> Result<Matrix> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("kernel bandwidth {sigma} must be > 0")));
    }
    let n = x.rows;
    if n < 2 {
        return Err(Error::invalid(format!("kernel matrix needs n >= 2, got {n}")));
    }
    let s2 = sigma * sigma;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.data[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = (-sq_dist(x.row(i), x.row(j)) / s2).exp();
            k.data[i * n + j] = v;
            k.data[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Median of all pairwise Euclidean distances, floored at `min_bandwidth`.
pub fn median_heuristic(x: &Matrix, min_bandwidth: f64) -> Result<f64> {
    let n = x.rows;
    if n < 2 {
        return Err(Error::invalid(format!("median heuristic needs n >= 2, got {n}")));
    }
    let rows: Vec<usize> = if n > MEDIAN_SUBSAMPLE_LIMIT {
        (0..MEDIAN_SUBSAMPLE_SIZE)
            .map(|i| i * n / MEDIAN_SUBSAMPLE_SIZE)
            .collect()
    } else {
        (0..n).collect()
    };
    let mut d = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            d.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    let m = median(&d);
    Ok(if m < min_bandwidth { min_bandwidth } else { m })
}

pub fn update_bandwidth(prev: f64, current: f64, momentum: f64, min_bandwidth: f64) -> f64 {
    (momentum * prev + (1.0 - momentum) * current).max(min_bandwidth)
}

/// `Kc = H K H`, computed from row, column and grand means.
fn double_centre(k: &Matrix) -> Matrix {
    let n = k.rows;
    let row_mean: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / n as f64).collect();
    let col_mean: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| k.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.data[i * n + j] = k.get(i, j) - row_mean[i] - col_mean[j] + grand;
        }
    }
    out
}

fn check_pair(f: &Matrix, g: &Matrix) -> Result<()> {
    if f.rows != g.rows {
        return Err(Error::ShapeMismatch {
            expected: vec![f.rows, g.cols],
            got: vec![g.rows, g.cols],
        });
    }
    if f.rows < 2 {
        return Err(Error::invalid(format!("HSIC needs n >= 2, got {}", f.rows)));
    }
    Ok(())
}

/// Unclamped estimator value; used by tests to bound the clamp.
pub fn hsic_raw(f: &Matrix, g: &Matrix, sigma_f: f64, sigma_g: f64) -> Result<f64> {
    check_pair(f, g)?;
    let kc = double_centre(&gaussian_kernel_matrix(f, sigma_f)?);
    let lc = double_centre(&gaussian_kernel_matrix(g, sigma_g)?);
    let n = f.rows as f64;
    let c = 1.0 / ((n - 1.0) * (n - 1.0));
    Ok(kc.data.iter().zip(&lc.data).map(|(a, b)| a * b).sum::<f64>() * c)
}

/// HSIC estimate, clamped at zero.
pub fn hsic_statistic(f: &Matrix, g: &Matrix, sigma_f: f64, sigma_g: f64) -> Result<f64> {
    Ok(hsic_raw(f, g, sigma_f, sigma_g)?.max(0.0))
}

/// HSIC value and its gradient with respect to every entry of `g`.
///
/// With `c = 1/(n-1)^2`, `d HSIC / d g_i = -(4c/sigma_g^2) sum_j Kc_ij L_ij (g_i - g_j)`.
pub fn hsic_value_and_grad(
    f: &Matrix,
    g: &Matrix,
    sigma_f: f64,
    sigma_g: f64,
) -> Result<(f64, Vec<f64>)> {
    check_pair(f, g)?;
    let n = f.rows;
    let kc = double_centre(&gaussian_kernel_matrix(f, sigma_f)?);
    let l = gaussian_kernel_matrix(g, sigma_g)?;
    let lc = double_centre(&l);
    let c = 1.0 / ((n as f64 - 1.0) * (n as f64 - 1.0));
    let value: f64 = kc.data.iter().zip(&lc.data).map(|(a, b)| a * b).sum::<f64>() * c;
    let d = g.cols;
    let scale = -4.0 * c / (sigma_g * sigma_g);
    let mut grad = vec![0.0; n * d];
    for i in 0..n {
        let gi = g.row(i);
        let out = &mut grad[i * d..(i + 1) * d];
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = scale * kc.get(i, j) * l.get(i, j);
            for (o, (a, b)) in out.iter_mut().zip(gi.iter().zip(g.row(j))) {
                *o += w * (a - b);
            }
        }
    }
    Ok((value.max(0.0), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn noise(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        Matrix::from_vec(n, d, (0..n * d).map(|_| nd.sample(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let k = gaussian_kernel_matrix(&col(&[0.0, 1.0, 0.0]), 1.0).unwrap();
        assert!((k.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.36788).abs() < 1e-5);
        assert_eq!(k.get(0, 2), 1.0);
        let x = noise(7, 3, 1);
        let k = gaussian_kernel_matrix(&x, 1.3).unwrap();
        for i in 0..7 {
            assert_eq!(k.get(i, i), 1.0);
            for j in 0..7 {
                assert_eq!(k.get(i, j), k.get(j, i));
                assert!(k.get(i, j) > 0.0 && k.get(i, j) <= 1.0);
            }
        }
        assert!(gaussian_kernel_matrix(&x, 0.0).is_err());
    }

    #[test]
    fn median_heuristic_examples() {
        assert_eq!(median_heuristic(&col(&[0.0, 1.0, 3.0]), 1e-6).unwrap(), 2.0);
        assert_eq!(median_heuristic(&col(&[0.0, 1.0]), 1e-6).unwrap(), 1.0);
        assert_eq!(median_heuristic(&col(&[4.0; 5]), 1e-3).unwrap(), 1e-3);
    }

    #[test]
    fn bandwidth_update_examples() {
        assert_eq!(update_bandwidth(2.0, 4.0, 0.0, 1e-6), 4.0);
        assert_eq!(update_bandwidth(2.0, 4.0, 1.0, 1e-6), 2.0);
        assert!((update_bandwidth(2.0, 4.0, 0.9, 1e-6) - 2.2).abs() < 1e-12);
        assert_eq!(update_bandwidth(1e-9, 1e-9, 0.5, 1e-6), 1e-6);
    }

    #[test]
    fn n2_closed_form() {
        let v = hsic_statistic(&col(&[0.0, 1.0]), &col(&[0.0, 2.0]), 1.0, 2.0).unwrap();
        let expected = (1.0 - (-1.0f64).exp()).powi(2);
        assert!((v - expected).abs() < 1e-12, "{v}");
        assert!((v - 0.39958).abs() < 1e-5);
    }

    #[test]
    fn constant_g_gives_zero() {
        let f = noise(10, 2, 4);
        let g = Matrix::from_vec(10, 3, vec![0.7; 30]).unwrap();
        assert_eq!(hsic_statistic(&f, &g, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_in_arguments() {
        let f = noise(12, 2, 5);
        let g = noise(12, 4, 6);
        let a = hsic_statistic(&f, &g, 1.1, 2.3).unwrap();
        let b = hsic_statistic(&g, &f, 2.3, 1.1).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn mismatched_rows_error() {
        assert!(hsic_statistic(&noise(4, 1, 1), &noise(5, 1, 1), 1.0, 1.0).is_err());
        assert!(hsic_statistic(&noise(1, 1, 1), &noise(1, 1, 1), 1.0, 1.0).is_err());
    }

    #[test]
    fn dependent_exceeds_independent() {
        let f = noise(512, 2, 10);
        let g = noise(512, 2, 11);
        let sf = median_heuristic(&f, 1e-6).unwrap();
        let sg = median_heuristic(&g, 1e-6).unwrap();
        let indep = hsic_statistic(&f, &g, sf, sg).unwrap();
        let dep = hsic_statistic(&f, &f, sf, sf).unwrap();
        assert!(dep > 10.0 * indep, "dep {dep} indep {indep}");
    }

    #[test]
    fn gradient_value_matches_statistic() {
        let f = noise(6, 2, 2);
        let g = noise(6, 3, 3);
        let (v, grad) = hsic_value_and_grad(&f, &g, 1.5, 1.7).unwrap();
        assert_eq!(v, hsic_statistic(&f, &g, 1.5, 1.7).unwrap());
        assert_eq!(grad.len(), 18);
    }
}
