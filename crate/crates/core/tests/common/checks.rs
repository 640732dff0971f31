//! Oracle comparisons shared by the per-module tests and the acceptance
//! target. Each returns a one-line summary, or the first mismatch.

use std::f64::consts::PI;

use indepcam::dsp::{correlation_matrix, higuchi_fd, multiscale_entropy, relative_bandpower, sample_entropy, welch_psd};
use indepcam::eval::{binomial_chance_test, independence_task, relevance_task, rep2label_task, AuxNetConfig};
use indepcam::hsic::{hsic_raw, hsic_statistic, median_heuristic};
use indepcam::matrix::Matrix;
use indepcam::signal::Split;

use super::oracles;

pub type Check = Result<String, String>;

pub const DSP_CASES: u64 = 20;

fn mat(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

pub fn hsic_trace_cases(cases: u64) -> Check {
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let n = 2 + (case as usize % 15);
        let df = 1 + (case as usize % 3);
        let dg = 1 + (case as usize / 3 % 4);
        let f = oracles::noise_rows(n, df, 1000 + case);
        let mut g = oracles::noise_rows(n, dg, 2000 + case);
        if case % 4 == 0 {
            // partly dependent pairs
            for (gi, fi) in g.iter_mut().zip(&f) {
                gi[0] += 2.0 * fi[0];
            }
        }
        let (fm, gm) = (mat(&f), mat(&g));
        let sf = median_heuristic(&fm, 1e-6).unwrap();
        let sg = if case % 2 == 0 { median_heuristic(&gm, 1e-6).unwrap() } else { 0.5 + case as f64 / 25.0 };
        let want = oracles::hsic_trace(&f, &g, sf, sg);
        let raw = hsic_raw(&fm, &gm, sf, sg).unwrap();
        let clamped = hsic_statistic(&fm, &gm, sf, sg).unwrap();
        let err = (raw - want).abs();
        if err > 1e-10 || (clamped - want.max(0.0)).abs() > 1e-10 {
            return Err(format!("case {case} (n={n}): library {raw:e}, oracle {want:e}"));
        }
        worst = worst.max(err);
    }
    Ok(format!("{cases} cases, max abs error {worst:.1e}"))
}

pub fn hsic_two_point() -> Check {
    let f = mat(&[vec![0.0], vec![1.0]]);
    let g = mat(&[vec![0.0], vec![2.0]]);
    let v = hsic_statistic(&f, &g, 1.0, 2.0).unwrap();
    let want = (1.0 - (-1.0f64).exp()).powi(2);
    if (v - want).abs() <= 1e-9 && (v - 0.39958).abs() < 1e-5 {
        Ok(format!("n=2 value {v:.10}"))
    } else {
        Err(format!("n=2 value {v}, closed form {want}"))
    }
}

fn compare_opt(what: &str, case: u64, got: Option<f64>, want: Option<f64>, tol: f64) -> Result<f64, String> {
    match (got, want) {
        (Some(a), Some(b)) if (a - b).abs() <= tol => Ok((a - b).abs()),
        (None, None) => Ok(0.0),
        _ => Err(format!("{what} case {case}: library {got:?}, oracle {want:?}")),
    }
}

pub fn sample_entropy_cases() -> Check {
    for case in 0..DSP_CASES {
        let n = 64 + 12 * case as usize;
        let m = 1 + case as usize % 3;
        let r = [0.1, 0.2, 0.3][case as usize % 3];
        let x = if case % 2 == 0 {
            oracles::uniform(n, 300 + case)
        } else {
            let z = oracles::noise(n, 300 + case);
            z.iter().enumerate().map(|(i, v)| (0.3 * i as f64).sin() + 0.5 * v).collect()
        };
        let got = sample_entropy(&x, m, r).unwrap();
        let want = oracles::sample_entropy(&x, m, r);
        if got != want {
            return Err(format!("sample entropy case {case}: library {got:?}, oracle {want:?}"));
        }
    }
    Ok(format!("{DSP_CASES} cases exact"))
}

pub fn multiscale_entropy_cases() -> Check {
    let mut worst: f64 = 0.0;
    for case in 0..DSP_CASES {
        let x = oracles::noise(150 + 15 * case as usize, 400 + case);
        let scales = [1, 2, 3];
        let got = multiscale_entropy(&x, &scales, 2, 0.2).unwrap();
        let want = oracles::multiscale_entropy(&x, &scales, 2, 0.2);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max(compare_opt("multiscale entropy", case, *a, *b, 1e-12)?);
        }
    }
    Ok(format!("{DSP_CASES} cases, max error {worst:.1e}"))
}

pub fn higuchi_cases() -> Check {
    let mut worst: f64 = 0.0;
    for case in 0..DSP_CASES {
        let n = 200 + 40 * case as usize;
        let k_max = 4 + case as usize % 9;
        let z = oracles::noise(n, 500 + case);
        let x: Vec<f64> = if case % 3 == 0 {
            z.iter().scan(0.0, |s, v| { *s += v; Some(*s) }).collect()
        } else {
            z
        };
        let got = higuchi_fd(&x, k_max).unwrap();
        let want = oracles::higuchi_fd(&x, k_max);
        worst = worst.max(compare_opt("higuchi", case, got, want, 1e-9)?);
    }
    Ok(format!("{DSP_CASES} cases, max error {worst:.1e}"))
}

pub fn correlation_cases() -> Check {
    let mut worst: f64 = 0.0;
    for case in 0..DSP_CASES {
        let w = 2 + case as usize % 5;
        let len = 10 + 7 * case as usize;
        let rows = oracles::noise_rows(w, len, 600 + case);
        let got = correlation_matrix(&rows).unwrap();
        let want = oracles::correlation_matrix(&rows);
        for i in 0..w {
            for j in 0..w {
                let e = (got.get(i, j) - want[i][j]).abs();
                if e > 1e-12 {
                    return Err(format!("correlation case {case} ({i},{j}): {} vs {}", got.get(i, j), want[i][j]));
                }
                worst = worst.max(e);
            }
        }
    }
    Ok(format!("{DSP_CASES} cases, max error {worst:.1e}"))
}

pub const EEG_BANDS: [(f64, f64); 4] = [(0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0)];

pub fn bandpower_cases() -> Check {
    let fs = 80.0;
    let mut worst: f64 = 0.0;
    for case in 0..DSP_CASES {
        let n = 320 + 40 * case as usize;
        let seg = [64, 100, 128, 160][case as usize % 4];
        let overlap = [0.0, 0.5, 0.25][case as usize % 3];
        let z = oracles::noise(n, 700 + case);
        let freq = 1.0 + 1.3 * case as f64;
        let x: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, v)| 0.5 * v + (2.0 * PI * freq * i as f64 / fs).sin())
            .collect();
        let got = relative_bandpower(&welch_psd(&x, fs, seg, overlap).unwrap(), &EEG_BANDS).unwrap();
        let (f, p) = oracles::welch_psd(&x, fs, seg, overlap);
        let want = oracles::relative_bandpower(&f, &p, &EEG_BANDS);
        for (a, b) in got.iter().zip(&want) {
            let e = (a - b).abs();
            if e > 1e-9 {
                return Err(format!("bandpower case {case}: {got:?} vs {want:?}"));
            }
            worst = worst.max(e);
        }
    }
    Ok(format!("{DSP_CASES} cases, max error {worst:.1e}"))
}

/// Balanced labels and a train/test split with `n_train` and `n_test` rows.
pub fn probe_layout(n_train: usize, n_test: usize) -> (Vec<usize>, Vec<Split>) {
    let labels: Vec<usize> = (0..n_train + n_test).map(|i| i % 2).collect();
    let splits = (0..n_train + n_test)
        .map(|i| if i < n_train { Split::Train } else { Split::Test })
        .collect();
    (labels, splits)
}

fn shuffled(labels: &[usize], seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut v = labels.to_vec();
    v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    v
}

pub fn relevance_separable() -> Check {
    let (labels, splits) = probe_layout(400, 400);
    let mut rows = oracles::noise_rows(labels.len(), 4, 11);
    for (r, &l) in rows.iter_mut().zip(&labels) {
        r[2] = l as f64;
    }
    let rep = relevance_task(&mat(&rows), &labels, &splits, 2, None, &AuxNetConfig::default()).map_err(|e| e.to_string())?;
    if rep.accuracy >= 0.99 {
        Ok(format!("accuracy {:.4}", rep.accuracy))
    } else {
        Err(format!("accuracy {:.4} < 0.99", rep.accuracy))
    }
}

pub fn relevance_null() -> Check {
    let (labels, splits) = probe_layout(1000, 1000);
    let rows = oracles::noise_rows(labels.len(), 4, 12);
    let rep = relevance_task(&mat(&rows), &shuffled(&labels, 13), &splits, 2, None, &AuxNetConfig::default())
        .map_err(|e| e.to_string())?;
    if (rep.accuracy - 0.5).abs() <= 0.05 {
        Ok(format!("accuracy {:.4}", rep.accuracy))
    } else {
        Err(format!("accuracy {:.4} outside 0.5 +- 0.05", rep.accuracy))
    }
}

pub fn independence_identity() -> Check {
    let (_, splits) = probe_layout(800, 400);
    let f = mat(&oracles::noise_rows(splits.len(), 4, 21));
    let rep = independence_task(&f, &f, &splits, &AuxNetConfig::default()).map_err(|e| e.to_string())?;
    if rep.avg_r2 >= 0.99 {
        Ok(format!("avg R2 {:.4}", rep.avg_r2))
    } else {
        Err(format!("avg R2 {:.4} < 0.99", rep.avg_r2))
    }
}

pub fn independence_null() -> Check {
    let (_, splits) = probe_layout(8000, 2000);
    let f = mat(&oracles::noise_rows(splits.len(), 4, 22));
    let g = mat(&oracles::noise_rows(splits.len(), 4, 23));
    let rep = independence_task(&g, &f, &splits, &AuxNetConfig::default()).map_err(|e| e.to_string())?;
    if rep.avg_r2.abs() <= 0.05 {
        Ok(format!("avg R2 {:.4}", rep.avg_r2))
    } else {
        Err(format!("|avg R2| {:.4} > 0.05", rep.avg_r2))
    }
}

pub fn rep2label_separable() -> Check {
    let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
    let g = mat(&labels.iter().map(|&l| vec![(l == 0) as u8 as f64, (l == 1) as u8 as f64]).collect::<Vec<_>>());
    let rep = rep2label_task(&g, &labels, 2, 5, &AuxNetConfig::default()).map_err(|e| e.to_string())?;
    if rep.accuracy >= 0.99 {
        Ok(format!("accuracy {:.4}", rep.accuracy))
    } else {
        Err(format!("accuracy {:.4} < 0.99", rep.accuracy))
    }
}

pub fn rep2label_null() -> Check {
    let labels: Vec<usize> = (0..600).map(|i| i % 2).collect();
    let g = mat(&oracles::noise_rows(labels.len(), 8, 31));
    let rep = rep2label_task(&g, &labels, 2, 5, &AuxNetConfig::default()).map_err(|e| e.to_string())?;
    if (rep.accuracy - 0.5).abs() <= 0.07 {
        Ok(format!("accuracy {:.4}, binomial p {:.3}", rep.accuracy, rep.p_chance))
    } else {
        Err(format!("accuracy {:.4} outside 0.5 +- 0.07", rep.accuracy))
    }
}

pub fn binomial_cases() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [1usize, 2, 5, 10, 17, 40, 101, 620] {
        for p0 in [0.5, 0.3, 0.62] {
            for k in (0..=n).step_by((n / 7).max(1)) {
                let got = binomial_chance_test(k, n, p0).unwrap();
                let want = oracles::binomial_two_sided(k, n, p0);
                let e = (got - want).abs();
                if e > 1e-9 {
                    return Err(format!("binomial ({k}, {n}, {p0}): {got} vs {want}"));
                }
                worst = worst.max(e);
                count += 1;
            }
        }
    }
    let six = binomial_chance_test(6, 10, 0.5).unwrap();
    if (six - 0.75390625).abs() > 1e-9 {
        return Err(format!("binomial (6, 10): {six}"));
    }
    Ok(format!("{count} cases, max error {worst:.1e}"))
}
