mod common;

use common::oracles;
use indepcam::cam::{
    aligned_templates, compute_cam, noise_analysis, paired_ttest, prominence, spearman, window_mean_stats,
    ActivationMap, Window,
};
use indepcam::events::{EventKind, EventList};
use indepcam::matrix::Matrix;
use proptest::prelude::*;

fn map(values: Vec<f64>) -> ActivationMap {
    ActivationMap { record_id: "r".into(), class: 1, valid_len: values.len(), values }
}

fn events(idx: Vec<usize>) -> EventList {
    EventList::new(EventKind::Synthetic, idx)
}

/// Explicit weighted sum over channels followed by linear interpolation.
fn cam_oracle(a: &[Vec<f64>], w: &[f64], valid: usize) -> Vec<f64> {
    let half = a[0].len();
    let latent: Vec<f64> = (0..half).map(|t| a.iter().zip(w).map(|(row, wc)| row[t] * wc).sum()).collect();
    (0..2 * half)
        .map(|t| {
            if t >= valid {
                return 0.0;
            }
            let lo = t / 2;
            let hi = (lo + 1).min(half - 1);
            if t % 2 == 0 { latent[lo] } else { 0.5 * (latent[lo] + latent[hi]) }
        })
        .collect()
}

#[test]
fn cam_hand_example() {
    let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let w = Matrix::from_vec(2, 3, vec![0.0, 0.0, 0.0, 9.0, 1.0, 2.0]).unwrap();
    let m = compute_cam("r", &a, &w, 1, 1, 6).unwrap();
    assert_eq!(m.values, vec![9.0, 10.5, 12.0, 13.5, 15.0, 15.0]);
    let m = compute_cam("r", &a, &w, 1, 1, 4).unwrap();
    assert_eq!(m.values, vec![9.0, 10.5, 12.0, 13.5, 0.0, 0.0]);
    assert!(compute_cam("r", &a, &w, 2, 1, 6).is_err());
    assert!(compute_cam("r", &a, &w, 1, 0, 6).is_err());
}

#[test]
fn cam_matches_oracle() {
    for seed in 0..20u64 {
        let (ch, half, fd) = (3 + seed as usize % 4, 10 + seed as usize, seed as usize % 3);
        let rows = oracles::noise_rows(ch, half, seed);
        let w = oracles::noise_rows(2, fd + ch, seed + 100);
        let valid = 2 * half - seed as usize % 5;
        let m = compute_cam("r", &Matrix::from_rows(&rows).unwrap(), &Matrix::from_rows(&w).unwrap(), 1, fd, valid).unwrap();
        let want = cam_oracle(&rows, &w[1][fd..], valid);
        for (g, e) in m.values.iter().zip(&want) {
            assert!((g - e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }
}

fn bump_map(len: usize, centers: &[usize], width: f64) -> ActivationMap {
    map((0..len)
        .map(|i| centers.iter().map(|&c| (-0.5 * ((i as f64 - c as f64) / width).powi(2)).exp()).sum())
        .collect())
}

fn bump_records(n: usize) -> (Vec<ActivationMap>, Vec<EventList>) {
    let centers: Vec<usize> = (0..8).map(|i| 60 + 80 * i).collect();
    let maps = (0..n).map(|_| bump_map(720, &centers, 2.0)).collect();
    let ev = (0..n).map(|_| events(centers.clone())).collect();
    (maps, ev)
}

#[test]
fn bump_template_peaks_at_landmark() {
    let (maps, ev) = bump_records(3);
    let t = aligned_templates(&maps, &ev, Window::ECG_TEMPLATE, 90.0).unwrap();
    let peak = (0..t.mean_profile.len()).max_by(|&i, &j| t.mean_profile[i].total_cmp(&t.mean_profile[j])).unwrap();
    assert!(peak.abs_diff(t.center) <= 2);
    assert_eq!(t.center, 36);
    assert_eq!(t.mean_profile.len(), 36 + 18 + 1);
    assert_eq!((t.n_events, t.skipped), (24, 0));
}

#[test]
fn bump_prominence_falls_with_noise() {
    let (maps, ev) = bump_records(60);
    let intensities = [0.0, 50.0, 100.0, 200.0];
    let ts = noise_analysis(&maps, &ev, Window::ECG_TEMPLATE, 90.0, &intensities, 3).unwrap();
    let p: Vec<f64> = ts.iter().map(|t| prominence(&t.mean_profile)).collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
    assert!(spearman(&intensities, &p).unwrap() <= 0.0);
}

#[test]
fn zero_intensity_matches_clean_template() {
    let (maps, ev) = bump_records(4);
    let clean = aligned_templates(&maps, &ev, Window::ECG_TEMPLATE, 90.0).unwrap();
    let noisy = noise_analysis(&maps, &ev, Window::ECG_TEMPLATE, 90.0, &[0.0, 100.0], 11).unwrap();
    assert_eq!(noisy[0], clean);
    assert_ne!(noisy[1].mean_profile, clean.mean_profile);
    assert_eq!(noisy, noise_analysis(&maps, &ev, Window::ECG_TEMPLATE, 90.0, &[0.0, 100.0], 11).unwrap());
    assert!(noise_analysis(&maps, &ev, Window::ECG_TEMPLATE, 90.0, &[100.0, 0.0], 11).is_err());
    assert!(noise_analysis(&maps, &ev, Window::ECG_TEMPLATE, 90.0, &[-1.0], 11).is_err());
}

#[test]
fn flat_map_ignores_shifts() {
    let maps = vec![map(vec![0.3; 720])];
    let ev = vec![events(vec![100, 300, 500])];
    let ts = noise_analysis(&maps, &ev, Window::ECG_TEMPLATE, 90.0, &[0.0, 200.0], 5).unwrap();
    for t in &ts {
        assert!(t.mean_profile.iter().all(|v| *v == 0.5));
        assert_eq!(prominence(&t.mean_profile), 0.0);
    }
}

#[test]
fn no_usable_event_is_an_error() {
    let maps = vec![map(vec![1.0; 100])];
    assert!(aligned_templates(&maps, &[events(vec![2, 98])], Window::ECG_TEMPLATE, 90.0).is_err());
    assert!(aligned_templates(&maps, &[], Window::ECG_TEMPLATE, 90.0).is_err());
}

#[test]
fn window_means_examples() {
    let maps = vec![map((0..200).map(|i| i as f64).collect())];
    let t = aligned_templates(&maps, &[events(vec![100])], Window::ECG_TEMPLATE, 90.0).unwrap();
    // normalized ramp: sample j of 55 maps to j / 54
    let means = window_mean_stats(&t, Window { start_ms: 0.0, end_ms: 0.0 }).unwrap();
    assert!((means[0] - 36.0 / 54.0).abs() < 1e-12);
    let p = window_mean_stats(&t, Window::P_WAVE).unwrap();
    // -250..-100 ms at 90 Hz covers offsets -22..=-9
    let want = (14..=27).map(|j| j as f64 / 54.0).sum::<f64>() / 14.0;
    assert!((p[0] - want).abs() < 1e-12);
    assert!(window_mean_stats(&t, Window { start_ms: -500.0, end_ms: 0.0 }).is_err());
}

#[test]
fn ttest_hand_example() {
    let r = paired_ttest(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], false).unwrap();
    assert!((r.t - 3.4641).abs() < 1e-4);
    assert!((r.p - 0.0742).abs() < 1e-4);
    assert_eq!(r.df, 2);
    let one = paired_ttest(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], true).unwrap();
    assert!((one.p - r.p / 2.0).abs() < 1e-12);
    assert!(paired_ttest(&[1.0], &[0.0], false).is_err());
    assert_eq!(paired_ttest(&[1.0, 2.0], &[1.0, 2.0], false).unwrap().p, 1.0);
}

/// Student t with 2 degrees of freedom has sf(t) = (1 - t / sqrt(2 + t^2)) / 2.
fn sf_df2(t: f64) -> f64 {
    0.5 * (1.0 - t / (2.0 + t * t).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cam_is_linear_in_weights(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let a = Matrix::from_rows(&oracles::noise_rows(4, 12, seed)).unwrap();
        let w1 = oracles::noise_rows(2, 5, seed + 1);
        let w2 = oracles::noise_rows(2, 5, seed + 2);
        let mix: Vec<Vec<f64>> = w1.iter().zip(&w2)
            .map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| alpha * x + beta * y).collect()).collect();
        let cam = |w: &[Vec<f64>]| compute_cam("r", &a, &Matrix::from_rows(w).unwrap(), 0, 1, 24).unwrap().values;
        let (c1, c2, cm) = (cam(&w1), cam(&w2), cam(&mix));
        for i in 0..24 {
            prop_assert!((cm[i] - alpha * c1[i] - beta * c2[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn events_are_used_or_skipped(seed in 0u64..1000, n in 1usize..30) {
        let idx: Vec<usize> = oracles::uniform(n, seed).iter().map(|u| (u * 300.0) as usize).collect();
        let maps = vec![map(oracles::noise(300, seed + 1))];
        let ev = vec![events(idx.clone())];
        if let Ok(t) = aligned_templates(&maps, &ev, Window::ECG_TEMPLATE, 90.0) {
            prop_assert_eq!(t.n_events + t.skipped, n);
            prop_assert_eq!(t.profiles.len(), t.n_events);
            prop_assert!(t.mean_profile.iter().all(|v| (0.0..=1.0).contains(v)));
        } else {
            prop_assert!(idx.iter().all(|&e| e < 36 || e + 18 >= 300));
        }
    }

    #[test]
    fn ttest_df2_matches_closed_form(d in prop::collection::vec(-5.0f64..5.0, 3)) {
        let zeros = [0.0; 3];
        let r = paired_ttest(&d, &zeros, true).unwrap();
        prop_assume!(r.note.is_none());
        prop_assert!((r.p - sf_df2(r.t)).abs() <= 1e-9);
    }

    #[test]
    fn spearman_is_rank_invariant(x in prop::collection::vec(-10.0f64..10.0, 3..20)) {
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0).collect();
        let s = spearman(&x, &y).unwrap();
        prop_assume!(x.iter().any(|v| *v != x[0]));
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }
}
