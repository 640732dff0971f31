mod common;

use indepcam::dsp::std_dev;
use indepcam::events::EventKind;
use indepcam::features::{detect_rapid_eye_movements, eeg_frequency_features};
use indepcam::synth::{gen_ecg_like, gen_eeg_like, EcgSynthParams, EegSynthParams, EOG_CHANNEL};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One-sided Welch test that the mean of `a` exceeds the mean of `b`.
fn welch_greater(a: &[f64], b: &[f64]) -> f64 {
    let m = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let v = |x: &[f64]| {
        let mu = m(x);
        x.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    let (va, vb) = (v(a) / a.len() as f64, v(b) / b.len() as f64);
    let t = (m(a) - m(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    StudentsT::new(0.0, 1.0, df).unwrap().sf(t)
}

#[test]
fn irregular_class_has_more_rr_spread() {
    let ds = gen_ecg_like(200, &EcgSynthParams::default()).unwrap();
    let mut spread = [Vec::new(), Vec::new()];
    for (rec, gt) in ds.records.iter().zip(&ds.truth) {
        let peaks = &gt.of_kind(EventKind::RPeak).unwrap().indices;
        let rr: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) as f64 / rec.fs).collect();
        spread[rec.label].push(std_dev(&rr));
    }
    assert!(spread[0].len() > 50 && spread[1].len() > 50);
    let p = welch_greater(&spread[1], &spread[0]);
    assert!(p < 0.01, "p = {p}");
}

#[test]
fn ecg_is_deterministic_and_seed_sensitive() {
    let p = EcgSynthParams::default();
    assert_eq!(gen_ecg_like(5, &p).unwrap(), gen_ecg_like(5, &p).unwrap());
    let q = EcgSynthParams { seed: 2, ..p.clone() };
    assert_ne!(gen_ecg_like(5, &p).unwrap().records, gen_ecg_like(5, &q).unwrap().records);
    let ds = gen_ecg_like(5, &p).unwrap();
    assert!(ds.records.iter().all(|r| r.samples.len() == p.len() && r.fs == p.fs));
}

#[test]
fn class_fraction_is_respected() {
    let p = EcgSynthParams { class1_fraction: 0.25, ..Default::default() };
    let labels = gen_ecg_like(200, &p).unwrap().labels();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    assert!((35..=65).contains(&ones), "{ones}");
}

#[test]
fn nrem_epochs_are_delta_dominated() {
    let ds = gen_eeg_like(100, &EegSynthParams::default()).unwrap();
    let nrem: Vec<_> = ds.records.iter().filter(|r| r.label == 0).collect();
    let ok = nrem
        .iter()
        .filter(|r| {
            let f = eeg_frequency_features(r).unwrap();
            f.values[0] > f.values[3]
        })
        .count();
    assert!(ok as f64 >= 0.9 * nrem.len() as f64, "{ok}/{}", nrem.len());
}

#[test]
fn rem_eye_movements_are_detectable() {
    let ds = gen_eeg_like(40, &EegSynthParams::default()).unwrap();
    let (mut hit, mut total) = (0, 0);
    for (rec, gt) in ds.records.iter().zip(&ds.truth) {
        let found = detect_rapid_eye_movements(rec, EOG_CHANNEL).unwrap();
        for &t in &gt.of_kind(EventKind::Rem).unwrap().indices {
            total += 1;
            if found.indices.iter().any(|&f| f.abs_diff(t) as f64 <= 0.1 * rec.fs) {
                hit += 1;
            }
        }
    }
    assert!(total > 0);
    assert!(hit as f64 >= 0.9 * total as f64, "{hit}/{total}");
}

#[test]
fn eeg_records_carry_eog_and_valid_events() {
    let ds = gen_eeg_like(8, &EegSynthParams::default()).unwrap();
    for (rec, gt) in ds.records.iter().zip(&ds.truth) {
        assert_eq!(rec.aux[EOG_CHANNEL].len(), rec.samples.len());
        for ev in &gt.events {
            ev.validate(rec.samples.len()).unwrap();
        }
        if rec.label == 0 {
            assert!(gt.of_kind(EventKind::Rem).map_or(true, |e| e.is_empty()));
        }
    }
}
