//! Signal containers, resampling, padding, splitting and class rebalancing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::filter::{filter_zero_phase, fir_lowpass};
use crate::error::{Error, Result};

/// Meta key holding the unpadded length of a record.
pub const META_ORIGINAL_LEN: &str = "original_len";
/// Meta key marking a record to be dropped at load time.
pub const META_EXCLUDE: &str = "exclude";

const ANTI_ALIAS_TAPS: usize = 61;
const ANTI_ALIAS_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub id: String,
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub label: usize,
    #[serde(default)]
    pub aux: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl SignalRecord {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, fs: f64, label: usize) -> Self {
        Self {
            id: id.into(),
            samples,
            fs,
            label,
            aux: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.fs > 0.0) {
            return Err(Error::Data(format!("record {}: fs must be > 0", self.id)));
        }
        if self.samples.is_empty() {
            return Err(Error::Data(format!("record {}: empty signal", self.id)));
        }
        if self.label >= k {
            return Err(Error::Data(format!(
                "record {}: label {} outside 0..{k}",
                self.id, self.label
            )));
        }
        for (name, ch) in &self.aux {
            if ch.len() != self.samples.len() {
                return Err(Error::Data(format!(
                    "record {}: aux channel {name} has length {}, signal has {}",
                    self.id,
                    ch.len(),
                    self.samples.len()
                )));
            }
        }
        Ok(())
    }

    /// Length before zero padding; falls back to the current length.
    pub fn original_len(&self) -> usize {
        self.meta
            .get(META_ORIGINAL_LEN)
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.samples.len())
    }

    pub fn duration_s(&self) -> f64 {
        self.original_len() as f64 / self.fs
    }

    pub fn is_excluded(&self) -> bool {
        self.meta.get(META_EXCLUDE).map(|v| v == "true").unwrap_or(false)
    }

    /// Resamples the signal and every aux channel to `fs_out`.
    pub fn resample_to(&mut self, fs_out: f64) -> Result<()> {
        if self.fs == fs_out {
            return Ok(());
        }
        let orig = self.original_len();
        self.samples = resample(&self.samples, self.fs, fs_out)?;
        for ch in self.aux.values_mut() {
            *ch = resample(ch, self.fs, fs_out)?;
        }
        if self.meta.contains_key(META_ORIGINAL_LEN) {
            let scaled = ((orig as f64) * fs_out / self.fs).floor() as usize;
            self.meta
                .insert(META_ORIGINAL_LEN.into(), scaled.min(self.samples.len()).to_string());
        }
        self.fs = fs_out;
        Ok(())
    }

    /// Zero pads the signal and aux channels to `target_len`, recording the
    /// unpadded length in `meta`.
    pub fn zero_pad_to(&mut self, target_len: usize) -> Result<()> {
        let orig = self.original_len();
        self.samples = zero_pad(&self.samples, target_len)?;
        for ch in self.aux.values_mut() {
            *ch = zero_pad(ch, target_len)?;
        }
        self.meta.insert(META_ORIGINAL_LEN.into(), orig.to_string());
        Ok(())
    }
}

/// Anti-aliased resampling from `fs_in` down to `fs_out`.
///
/// Output length is `floor(len * fs_out / fs_in)`. The signal is low-passed at
/// `0.45 * fs_out` with a 61-tap zero-phase FIR, then read off at the output
/// instants by linear interpolation.
pub fn resample(samples: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    if !(fs_in > 0.0 && fs_out > 0.0) {
        return Err(Error::invalid(format!(
            "sampling rates must be positive (got {fs_in} -> {fs_out})"
        )));
    }
    if fs_out > fs_in {
        return Err(Error::invalid(format!(
            "upsampling not supported ({fs_in} -> {fs_out} Hz)"
        )));
    }
    if fs_in == fs_out {
        return Ok(samples.to_vec());
    }
    let h = fir_lowpass(ANTI_ALIAS_FRACTION * fs_out, fs_in, ANTI_ALIAS_TAPS)?;
    let smoothed = filter_zero_phase(samples, &h);
    let out_len = (samples.len() as f64 * fs_out / fs_in).floor() as usize;
    let step = fs_in / fs_out;
    let last = smoothed.len().saturating_sub(1);
    Ok((0..out_len)
        .map(|k| {
            let pos = k as f64 * step;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if frac == 0.0 || i == last {
                smoothed[i]
            } else {
                smoothed[i] * (1.0 - frac) + smoothed[i + 1] * frac
            }
        })
        .collect())
}

pub fn zero_pad(samples: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if samples.len() > target_len {
        return Err(Error::invalid(format!(
            "signal of length {} exceeds padding target {target_len}",
            samples.len()
        )));
    }
    let mut out = Vec::with_capacity(target_len);
    out.extend_from_slice(samples);
    out.resize(target_len, 0.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<SignalRecord>,
    pub k: usize,
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.records[i].label).collect()
    }

    pub fn count(&self, split: Split, label: usize) -> usize {
        self.records
            .iter()
            .zip(&self.splits)
            .filter(|(r, s)| **s == split && r.label == label)
            .count()
    }
}

/// Deterministic, optionally stratified assignment of records to
/// train/val/test.
///
/// Per-class counts stay within one record of the exact ratio and split
/// totals match a largest-remainder apportionment of the whole set.
pub fn split_dataset(
    records: Vec<SignalRecord>,
    k: usize,
    ratios: (f64, f64, f64),
    stratify_by_label: bool,
    seed: u64,
) -> Result<Dataset> {
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let splits = assign_splits(&labels, k, ratios, stratify_by_label, seed)?;
    Ok(Dataset { records, k, splits })
}

pub fn assign_splits(
    labels: &[usize],
    k: usize,
    ratios: (f64, f64, f64),
    stratify_by_label: bool,
    seed: u64,
) -> Result<Vec<Split>> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|v| !(*v > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
    }
    let groups: Vec<Vec<usize>> = if stratify_by_label {
        (0..k)
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    for (c, g) in groups.iter().enumerate() {
        if !g.is_empty() && g.len() < r.len() {
            let name = if stratify_by_label {
                format!("class {c}")
            } else {
                "dataset".to_string()
            };
            return Err(Error::invalid(format!(
                "{name} has {} records, fewer than the {} splits",
                g.len(),
                r.len()
            )));
        }
    }

    let counts = apportion(&groups.iter().map(Vec::len).collect::<Vec<_>>(), &r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Split::Train; labels.len()];
    for (g, cnt) in groups.iter().zip(&counts) {
        let mut idx = g.clone();
        idx.shuffle(&mut rng);
        let mut cursor = 0;
        for (s, &n) in Split::ALL.iter().zip(cnt) {
            for &i in &idx[cursor..cursor + n] {
                out[i] = *s;
            }
            cursor += n;
        }
    }
    Ok(out)
}

/// Splits each group's size across ratios so that each (group, split) cell
/// is the floor or ceiling of its exact share and column totals follow the
/// largest-remainder rule on the pooled size.
fn apportion(group_sizes: &[usize], ratios: &[f64]) -> Vec<Vec<usize>> {
    let total: usize = group_sizes.iter().sum();
    let largest_remainder = |n: usize| -> Vec<usize> {
        let exact: Vec<f64> = ratios.iter().map(|r| n as f64 * r).collect();
        let mut base: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..ratios.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        let mut left = n - base.iter().sum::<usize>();
        for &s in order.iter().cycle() {
            if left == 0 {
                break;
            }
            base[s] += 1;
            left -= 1;
        }
        base
    };

    let targets = largest_remainder(total);
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut fracs: Vec<(f64, usize, usize)> = Vec::new();
    let mut leftover = Vec::new();
    for (g, &n) in group_sizes.iter().enumerate() {
        let exact: Vec<f64> = ratios.iter().map(|r| n as f64 * r).collect();
        let base: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        leftover.push(n - base.iter().sum::<usize>());
        for (s, e) in exact.iter().enumerate() {
            fracs.push((e - e.floor(), g, s));
        }
        cells.push(base);
    }
    let mut deficit: Vec<isize> = (0..ratios.len())
        .map(|s| targets[s] as isize - cells.iter().map(|c| c[s] as isize).sum::<isize>())
        .collect();
    fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut bumped = vec![vec![false; ratios.len()]; group_sizes.len()];
    for &(frac, g, s) in &fracs {
        if frac > 0.0 && leftover[g] > 0 && deficit[s] > 0 {
            cells[g][s] += 1;
            bumped[g][s] = true;
            leftover[g] -= 1;
            deficit[s] -= 1;
        }
    }
    // Remaining leftovers go wherever a split is still short.
    for g in 0..group_sizes.len() {
        while leftover[g] > 0 {
            let s = (0..ratios.len())
                .filter(|&s| !bumped[g][s])
                .max_by_key(|&s| (deficit[s], std::cmp::Reverse(s)))
                .or_else(|| (0..ratios.len()).max_by_key(|&s| deficit[s]))
                .unwrap();
            cells[g][s] += 1;
            bumped[g][s] = true;
            leftover[g] -= 1;
            deficit[s] -= 1;
        }
    }
    cells
}

/// Indices of a two-class training split after duplicating minority records
/// (with replacement, seeded) until minority/majority reaches `target_ratio`.
pub fn upsample_minority_indices(
    labels: &[usize],
    target_ratio: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(Error::invalid(format!(
            "target ratio {target_ratio} outside (0, 1]"
        )));
    }
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if classes.len() > 2 {
        return Err(Error::invalid(format!(
            "upsampling expects two classes, found {}",
            classes.len()
        )));
    }
    let count = |c: usize| labels.iter().filter(|&&l| l == c).count();
    let (c0, c1) = match classes.iter().copied().collect::<Vec<_>>()[..] {
        [a, b] => (a, b),
        [a] => (a, if a == 0 { 1 } else { 0 }),
        _ => return Err(Error::invalid("empty training split")),
    };
    let (minority, majority) = if count(c1) < count(c0) || (count(c1) == count(c0) && c1 > c0) {
        (c1, c0)
    } else {
        (c0, c1)
    };
    let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority).collect();
    if pool.is_empty() {
        return Err(Error::invalid(format!("minority class {minority} is empty")));
    }
    let target = (target_ratio * count(majority) as f64).round() as usize;
    let mut out: Vec<usize> = (0..labels.len()).collect();
    if pool.len() >= target {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in pool.len()..target {
        out.push(pool[rng.random_range(0..pool.len())]);
    }
    Ok(out)
}

/// Record-level form of [`upsample_minority_indices`].
pub fn upsample_minority(
    train_records: &[SignalRecord],
    target_ratio: f64,
    seed: u64,
) -> Result<Vec<SignalRecord>> {
    let labels: Vec<usize> = train_records.iter().map(|r| r.label).collect();
    Ok(upsample_minority_indices(&labels, target_ratio, seed)?
        .into_iter()
        .map(|i| train_records[i].clone())
        .collect())
}
