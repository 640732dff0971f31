//! Class activation maps, landmark-aligned templates and the statistics
//! used to compare them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::events::EventList;
use crate::matrix::Matrix;

/// One class's activation over the input timeline of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMap {
    pub record_id: String,
    pub class: usize,
    pub values: Vec<f64>,
    /// Samples beyond this index were padding and hold zeros.
    pub valid_len: usize,
}

/// Weights the `channels x T/2` maps with the g-aligned part of the class
/// row of the output layer, then interpolates linearly onto `2 * T/2`
/// input samples. Position `t` reads the latent timeline at `t / 2`.
pub fn compute_cam(
    record_id: &str,
    feature_maps: &Matrix,
    fc_weights: &Matrix,
    class: usize,
    feature_dim: usize,
    valid_len: usize,
) -> Result<ActivationMap> {
    let channels = feature_maps.rows;
    if fc_weights.cols != feature_dim + channels {
        return Err(Error::ShapeMismatch {
            expected: vec![fc_weights.rows, feature_dim + channels],
            got: vec![fc_weights.rows, fc_weights.cols],
        });
    }
    if class >= fc_weights.rows {
        return Err(Error::invalid(format!(
            "class {class} outside 0..{}",
            fc_weights.rows
        )));
    }
    let w = &fc_weights.row(class)[feature_dim..];
    let half = feature_maps.cols;
    let mut latent = vec![0.0; half];
    for (ch, &wc) in w.iter().enumerate() {
        for (acc, a) in latent.iter_mut().zip(feature_maps.row(ch)) {
            *acc += wc * a;
        }
    }
    let len = 2 * half;
    let valid_len = valid_len.min(len);
    let values = (0..len)
        .map(|t| {
            if t >= valid_len {
                return 0.0;
            }
            let pos = t as f64 / 2.0;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(half - 1);
            let frac = pos - lo as f64;
            latent[lo] * (1.0 - frac) + latent[hi] * frac
        })
        .collect();
    Ok(ActivationMap {
        record_id: record_id.to_string(),
        class,
        values,
        valid_len,
    })
}

/// Time span around a landmark, in milliseconds (`start_ms` < 0 is before
/// the landmark).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Window {
    pub const ECG_TEMPLATE: Window = Window {
        start_ms: -400.0,
        end_ms: 200.0,
    };
    pub const P_WAVE: Window = Window {
        start_ms: -250.0,
        end_ms: -100.0,
    };
    pub const QR: Window = Window {
        start_ms: -50.0,
        end_ms: 25.0,
    };
    pub const EEG_EVENT: Window = Window {
        start_ms: -2000.0,
        end_ms: 2000.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.start_ms.is_finite() && self.end_ms.is_finite() && self.start_ms <= 0.0 && self.end_ms >= 0.0) {
            return Err(Error::Config(format!(
                "window {}..{} ms must contain the landmark",
                self.start_ms, self.end_ms
            )));
        }
        Ok(())
    }

    /// Samples before and after the landmark.
    fn extent(&self, fs: f64) -> (usize, usize) {
        (
            (-self.start_ms * fs / 1000.0).round() as usize,
            (self.end_ms * fs / 1000.0).round() as usize,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub window: Window,
    pub fs: f64,
    /// Profile index of the landmark.
    pub center: usize,
    pub mean_profile: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    pub n_events: usize,
    pub skipped: usize,
}

impl Template {
    /// Offset of each profile sample from the landmark, in milliseconds.
    pub fn times_ms(&self) -> Vec<f64> {
        (0..self.mean_profile.len())
            .map(|j| (j as f64 - self.center as f64) * 1000.0 / self.fs)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_ms,activation\n");
        for (t, v) in self.times_ms().iter().zip(&self.mean_profile) {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }
}

/// Min-max scaling to [0, 1]; constant profiles become 0.5 everywhere.
pub fn normalize_profile(p: &[f64]) -> Vec<f64> {
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return vec![0.5; p.len()];
    }
    p.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

fn template_from_indices(maps: &[ActivationMap], events: &[Vec<usize>], window: Window, fs: f64) -> Result<Template> {
    window.validate()?;
    if !(fs > 0.0) {
        return Err(Error::invalid(format!("sampling rate {fs} must be positive")));
    }
    if maps.len() != events.len() {
        return Err(Error::invalid(format!(
            "{} maps but {} event lists",
            maps.len(),
            events.len()
        )));
    }
    let (pre, post) = window.extent(fs);
    let mut profiles = Vec::new();
    let mut skipped = 0;
    for (map, idx) in maps.iter().zip(events) {
        for &e in idx {
            if e < pre || e + post >= map.valid_len.min(map.values.len()) {
                skipped += 1;
                continue;
            }
            profiles.push(normalize_profile(&map.values[e - pre..=e + post]));
        }
    }
    if profiles.is_empty() {
        return Err(Error::Data(format!(
            "no event leaves room for a {}..{} ms window",
            window.start_ms, window.end_ms
        )));
    }
    let len = pre + post + 1;
    let mut mean_profile = vec![0.0; len];
    for p in &profiles {
        for (m, v) in mean_profile.iter_mut().zip(p) {
            *m += v;
        }
    }
    let n = profiles.len() as f64;
    mean_profile.iter_mut().for_each(|m| *m /= n);
    Ok(Template {
        window,
        fs,
        center: pre,
        mean_profile,
        n_events: profiles.len(),
        profiles,
        skipped,
    })
}

/// Cuts `window` around every event of the matching record, normalizes each
/// cut to [0, 1] and averages. Events too close to an edge or to padding
/// are skipped and counted.
pub fn aligned_templates(maps: &[ActivationMap], events: &[EventList], window: Window, fs: f64) -> Result<Template> {
    let idx: Vec<Vec<usize>> = events.iter().map(|e| e.indices.clone()).collect();
    template_from_indices(maps, &idx, window, fs)
}

/// Templates after delaying every event by a uniform random
/// `[0, intensity]` ms. Intensity 0 leaves the events untouched.
pub fn noise_analysis(
    maps: &[ActivationMap],
    events: &[EventList],
    window: Window,
    fs: f64,
    intensities_ms: &[f64],
    seed: u64,
) -> Result<Vec<Template>> {
    if intensities_ms.iter().any(|&i| !(i >= 0.0 && i.is_finite())) {
        return Err(Error::invalid("noise intensities must be non-negative"));
    }
    if intensities_ms.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("noise intensities must be ascending"));
    }
    intensities_ms
        .iter()
        .enumerate()
        .map(|(k, &intensity)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let idx: Vec<Vec<usize>> = events
                .iter()
                .map(|ev| {
                    ev.indices
                        .iter()
                        .map(|&e| {
                            if intensity == 0.0 {
                                return e;
                            }
                            let shift_ms = rng.random_range(0.0..=intensity);
                            e + (shift_ms * fs / 1000.0).round() as usize
                        })
                        .collect()
                })
                .collect();
            template_from_indices(maps, &idx, window, fs)
        })
        .collect()
}

/// Mean of each per-event profile over the samples of `sub` (inclusive).
pub fn window_mean_stats(template: &Template, sub: Window) -> Result<Vec<f64>> {
    if sub.start_ms > sub.end_ms || sub.start_ms < template.window.start_ms || sub.end_ms > template.window.end_ms {
        return Err(Error::invalid(format!(
            "sub-window {}..{} ms outside the template window {}..{} ms",
            sub.start_ms, sub.end_ms, template.window.start_ms, template.window.end_ms
        )));
    }
    let tol = 1e-9;
    let cols: Vec<usize> = template
        .times_ms()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= sub.start_ms - tol && t <= sub.end_ms + tol)
        .map(|(j, _)| j)
        .collect();
    if cols.is_empty() {
        return Err(Error::invalid(format!(
            "sub-window {}..{} ms holds no samples at {} Hz",
            sub.start_ms, sub.end_ms, template.fs
        )));
    }
    Ok(template
        .profiles
        .iter()
        .map(|p| cols.iter().map(|&j| p[j]).sum::<f64>() / cols.len() as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub n: usize,
    pub df: usize,
    pub mean_difference: f64,
    pub one_sided: bool,
    /// Set when the differences have zero variance.
    pub note: Option<String>,
}

/// Paired t-test on `a - b` with `n - 1` degrees of freedom. The one-sided
/// form tests `mean(a - b) > 0`.
pub fn paired_ttest(a: &[f64], b: &[f64], one_sided: bool) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid(format!(
            "paired t-test needs two equal samples of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let mk = |t: f64, p: f64, note: Option<String>| TTest {
        t,
        p,
        n,
        df,
        mean_difference: mean,
        one_sided,
        note,
    };
    if var <= 0.0 {
        if mean == 0.0 {
            return Ok(mk(0.0, 1.0, Some("all differences are zero".into())));
        }
        let t = mean.signum() * f64::INFINITY;
        let p = if one_sided && mean < 0.0 { 1.0 } else { 0.0 };
        return Ok(mk(t, p, Some("differences have zero variance".into())));
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let p = if one_sided {
        dist.sf(t)
    } else {
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(mk(t, p, None))
}

/// Average ranks (1-based), ties sharing their mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("spearman needs two equal samples of at least 2"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let m = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - m) * (b - m);
        sxx += (a - m).powi(2);
        syy += (b - m).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Peak height of a template above its median.
pub fn prominence(profile: &[f64]) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max - crate::dsp::median(profile)
}
