mod common;

use lane_intent::features::FeatureParams;
use lane_intent::imbalance::{
    apply_thresholds, argmax, calibrate_thresholds, inverse_frequency_weights, resample, smote, tomek_links,
    ResampleConfig,
};
use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::labeling::Label;
use lane_intent::metrics::macro_f1;
use lane_intent::pipeline::{build_datasets, LabeledRecording};
use common::{brute_force_tomek, dist2, random_matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn smote_points_lie_on_segments_to_a_near_neighbor() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let rows = rng.gen_range(2..40);
        let cols = rng.gen_range(1..6);
        let k = rng.gen_range(1..8);
        let x = random_matrix(&mut rng, rows, cols, false);
        let n_new = rng.gen_range(1..60);
        let out = smote(&x, n_new, k, trial).unwrap();
        assert_eq!(out.len(), n_new);
        for s in &out {
            assert!((0.0..=1.0).contains(&s.u));
            let (b, nb) = (x.row(s.base), x.row(s.neighbor));
            for j in 0..cols {
                let want = b[j].unwrap() + s.u * (nb[j].unwrap() - b[j].unwrap());
                worst = worst.max((s.values[j].unwrap() - want).abs());
            }
            // the neighbor is no farther than the k-th nearest other row
            let mut d: Vec<f64> = (0..rows).filter(|&j| j != s.base).map(|j| dist2(b, x.row(j))).collect();
            d.sort_by(f64::total_cmp);
            let kth = d[k.min(d.len()) - 1];
            assert!(dist2(b, nb) <= kth);
        }
    }
    assert!(worst < 1e-9, "convexity residual {worst}");
}

#[test]
fn tomek_links_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0;
    for trial in 0..100 {
        let rows = rng.gen_range(2..=if trial % 10 == 0 { 500 } else { 120 });
        let cols = rng.gen_range(1..4);
        let x = random_matrix(&mut rng, rows, cols, trial % 3 == 0);
        let y: Vec<Label> = (0..rows)
            .map(|_| Label::from_index(rng.gen_range(0..3)).unwrap())
            .collect();
        let got = tomek_links(&x, &y);
        assert_eq!(got, brute_force_tomek(&x, &y), "trial {trial}");
        total += got.len();
    }
    assert!(total > 0);
}

proptest! {
    #[test]
    fn weight_times_frequency_is_one(a in 1usize..100_000, b in 1usize..5_000, c in 1usize..5_000) {
        let counts = [a, b, c];
        let w = inverse_frequency_weights(counts).unwrap();
        let n = (a + b + c) as f64;
        for k in 0..3 {
            let f = counts[k] as f64 / n;
            prop_assert!((w.0[k] * f - 1.0).abs() <= f64::EPSILON, "{} * {}", w.0[k], f);
        }
    }
}

#[test]
fn calibration_never_loses_to_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..1000 {
        let n = rng.gen_range(6..150);
        let labels: Vec<Label> = (0..n)
            .map(|i| Label::from_index(if i < 2 { i + 1 } else { rng.gen_range(0..3) }).unwrap())
            .collect();
        let probs: Vec<[f64; 3]> = labels
            .iter()
            .map(|l| {
                let mut p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.01..1.0));
                p[l.index()] += rng.gen_range(0.0..0.8);
                let s: f64 = p.iter().sum();
                p.map(|v| v / s)
            })
            .collect();
        let taus = calibrate_thresholds(&probs, &labels).unwrap();
        let tuned: Vec<Label> = probs.iter().map(|p| apply_thresholds(p, &taus)).collect();
        let plain: Vec<Label> = probs.iter().map(argmax).collect();
        assert!(macro_f1(&tuned, &labels) >= macro_f1(&plain, &labels), "trial {trial}");
    }
}

#[test]
fn heavily_skewed_corpus_reaches_target_ratio_before_cleaning() {
    let corpus: Vec<LabeledRecording> = synthesize_corpus(&SynthConfig {
        n_locations: 2,
        tracks_per_location: 400,
        maneuver_rate: 0.02,
        class_skew: [252.0, 1.0, 1.0],
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap();
    let refs: Vec<&LabeledRecording> = corpus.iter().collect();
    let stats = lane_intent::features::fit_neighbor_stats(corpus.iter().map(|e| (&e.0, e.1.as_slice())));
    let ds = build_datasets(&refs, 1.0, &[1.0], 5, &stats, FeatureParams::default(), 1)
        .unwrap()
        .remove(0);
    let before = ds.class_counts();
    let input_ratio = before[0] as f64 / (before[1] + before[2]) as f64 * 2.0;
    assert!((150.0..=400.0).contains(&input_ratio), "input skew {before:?}");

    let idx: Vec<usize> = (0..ds.samples.len()).collect();
    let out = resample(&ds.feature_matrix(&idx), &ds.labels(), &ResampleConfig::default()).unwrap();
    let s = out.report.after_smote;
    for c in 1..3 {
        let ratio = s[0] as f64 / s[c] as f64;
        assert!((ratio / 27.0 - 1.0).abs() <= 0.10, "class {c}: {s:?}");
    }
}
