//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits nonzero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{
    bilstm_fd_worst, brute_force_tomek, check_split_oracle, dist2, random_matrix, softmax_fd_worst,
};
use lane_intent::artifact::Artifact;
use lane_intent::bilstm::{Pooling, TrainConfig};
use lane_intent::features::{fit_neighbor_stats, FeatureParams};
use lane_intent::gbdt::{leaf_value, split_gain, GbdtConfig};
use lane_intent::imbalance::{
    apply_thresholds, argmax, calibrate_thresholds, inverse_frequency_weights, resample, smote, tomek_links,
    ResampleConfig,
};
use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::labeling::{detect_events, Label, LabelingParams};
use lane_intent::metrics::macro_f1;
use lane_intent::pipeline::{
    build_datasets, sweep, ExperimentConfig, LabeledRecording, ModelKind, PipelineConfig, SearchSpace, SplitSpec,
    SweepRow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit_s: f64) -> Result<f64, String> {
    let s = start.elapsed().as_secs_f64();
    ensure(s < limit_s, format!("took {s:.1}s, limit {limit_s}s"))?;
    Ok(s)
}

fn labeling_oracle() -> Check {
    let cfg = SynthConfig {
        n_locations: 4,
        tracks_per_location: 250,
        maneuver_rate: 0.2,
        class_skew: [60.0, 1.0, 1.0],
        ramp_fraction: 0.5,
        noise_std: 0.05,
        seed: 101,
        ..SynthConfig::default()
    };
    let corpus = synthesize_corpus(&cfg).map_err(|e| e.to_string())?;
    let tracks: usize = corpus.iter().map(|c| c.0.tracks.len()).sum();
    ensure(tracks >= 1000, format!("only {tracks} tracks"))?;
    let kinds: Vec<_> = corpus.iter().map(|c| c.0.dataset_kind).collect();
    ensure(kinds.iter().any(|k| *k != kinds[0]), "corpus is not mixed")?;

    let start = Instant::now();
    let params = LabelingParams::default();
    let (mut truth_n, mut found_n, mut matched, mut direction_ok) = (0, 0, 0, 0);
    for (rec, truth) in &corpus {
        let mut found = Vec::new();
        for t in &rec.tracks {
            found.extend(detect_events(t, &params, rec.dataset_kind, rec.sampling_rate).map_err(|e| e.to_string())?);
        }
        truth_n += truth.len();
        found_n += found.len();
        for f in &found {
            let hit = truth.iter().find(|t| {
                t.track_id == f.track_id
                    && t.start_frame.abs_diff(f.start_frame) <= 1
                    && t.end_frame.abs_diff(f.end_frame) <= 1
            });
            if let Some(t) = hit {
                matched += 1;
                direction_ok += usize::from(t.direction == f.direction);
            }
        }
    }
    let secs = within_time(start, 30.0)?;
    let precision = matched as f64 / found_n.max(1) as f64;
    let recall = matched as f64 / truth_n.max(1) as f64;
    ensure(
        precision == 1.0 && recall == 1.0 && direction_ok == matched,
        format!("precision {precision}, recall {recall}, directions {direction_ok}/{matched}"),
    )?;
    Ok(format!(
        "{tracks} tracks, {truth_n} events: precision 1, recall 1, direction 1 ({secs:.1}s detection)"
    ))
}

fn split_oracle() -> Check {
    let start = Instant::now();
    let found = check_split_oracle(200, 2024)?;
    let secs = within_time(start, 60.0)?;
    Ok(format!("200 instances ({found} with a split) match exhaustive enumeration ({secs:.2}s)"))
}

fn gain_and_softmax() -> Check {
    let table = [
        (-4.0, 2.0, 6.0, 3.0, 1.0, 0.0, 0.5 * (16.0 / 3.0 + 36.0 / 4.0 - 4.0 / 6.0)),
        (2.0, 1.0, -2.0, 1.0, 0.0, 0.0, 4.0),
        (2.0, 1.0, -2.0, 1.0, 1.0, 0.5, 1.5),
        (3.0, 2.0, 3.0, 2.0, 1.0, 0.0, 0.5 * (3.0 + 3.0 - 36.0 / 5.0)),
    ];
    for (gl, hl, gr, hr, lambda, gamma, want) in table {
        let got = split_gain(gl, hl, gr, hr, lambda, gamma);
        ensure((got - want).abs() < 1e-12, format!("gain {got} vs {want}"))?;
    }
    ensure(leaf_value(-4.0, 2.0, 1.0) == 4.0 / 3.0, "leaf value")?;
    let worst = softmax_fd_worst(100, 77);
    ensure(worst < 1e-5, format!("softmax worst relative error {worst:e}"))?;
    Ok(format!("gain table exact; softmax g/h worst relative error {worst:.1e} over 100 instances"))
}

fn bilstm_gradients() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (pooling, seed) in [(Pooling::Mean, 1), (Pooling::Last, 2), (Pooling::Max, 3)] {
        worst = worst.max(bilstm_fd_worst(pooling, seed));
    }
    let secs = within_time(start, 60.0)?;
    ensure(worst < 1e-4, format!("worst relative error {worst:e}"))?;
    Ok(format!("14 tensors, three poolings: worst relative error {worst:.1e} ({secs:.2}s)"))
}

fn imbalance_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut residual: f64 = 0.0;
    for trial in 0..50 {
        let (rows, cols, k) = (rng.gen_range(2..40), rng.gen_range(1..6), rng.gen_range(1..8));
        let x = random_matrix(&mut rng, rows, cols, false);
        for s in smote(&x, rng.gen_range(1..60), k, trial).map_err(|e| e.to_string())? {
            let (b, nb) = (x.row(s.base), x.row(s.neighbor));
            for j in 0..cols {
                let want = b[j].unwrap() + s.u * (nb[j].unwrap() - b[j].unwrap());
                residual = residual.max((s.values[j].unwrap() - want).abs());
            }
            ensure((0.0..=1.0).contains(&s.u), "u outside [0, 1]")?;
            let mut d: Vec<f64> = (0..rows).filter(|&j| j != s.base).map(|j| dist2(b, x.row(j))).collect();
            d.sort_by(f64::total_cmp);
            ensure(dist2(b, nb) <= d[k.min(d.len()) - 1], "neighbor outside the k nearest")?;
        }
    }
    ensure(residual < 1e-9, format!("SMOTE convexity residual {residual:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let rows = rng.gen_range(2..=if trial % 10 == 0 { 500 } else { 120 });
        let cols = rng.gen_range(1..4);
        let x = random_matrix(&mut rng, rows, cols, trial % 3 == 0);
        let y: Vec<Label> = (0..rows).map(|_| Label::from_index(rng.gen_range(0..3)).unwrap()).collect();
        ensure(tomek_links(&x, &y) == brute_force_tomek(&x, &y), format!("Tomek set {trial} differs"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut exact, mut total) = (0, 0);
    for _ in 0..10_000 {
        let counts = [rng.gen_range(1..100_000), rng.gen_range(1..5_000), rng.gen_range(1..5_000)];
        let w = inverse_frequency_weights(counts).map_err(|e| e.to_string())?;
        let n: usize = counts.iter().sum();
        for c in 0..3 {
            let p = w.0[c] * (counts[c] as f64 / n as f64);
            ensure((p - 1.0).abs() <= f64::EPSILON, format!("w*f = {p:e} for {counts:?}"))?;
            exact += usize::from(p == 1.0);
            total += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(13);
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
        let taus = calibrate_thresholds(&probs, &labels).map_err(|e| e.to_string())?;
        let tuned: Vec<Label> = probs.iter().map(|p| apply_thresholds(p, &taus)).collect();
        let plain: Vec<Label> = probs.iter().map(argmax).collect();
        ensure(macro_f1(&tuned, &labels) >= macro_f1(&plain, &labels), format!("calibration set {trial}"))?;
    }
    Ok(format!(
        "SMOTE residual {residual:.1e}; 100 Tomek sets equal; w*f = 1 within one ulp ({exact}/{total} bit-exact); \
         calibrated >= argmax on 1000 sets"
    ))
}

fn ratio_reproduction() -> Check {
    let corpus = synthesize_corpus(&SynthConfig {
        n_locations: 2,
        tracks_per_location: 400,
        maneuver_rate: 0.02,
        class_skew: [252.0, 1.0, 1.0],
        seed: 21,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let refs: Vec<&LabeledRecording> = corpus.iter().collect();
    let stats = fit_neighbor_stats(corpus.iter().map(|e| (&e.0, e.1.as_slice())));
    let ds = build_datasets(&refs, 1.0, &[1.0], 5, &stats, FeatureParams::default(), 1)
        .map_err(|e| e.to_string())?
        .remove(0);
    let before = ds.class_counts();
    let idx: Vec<usize> = (0..ds.samples.len()).collect();
    let out = resample(&ds.feature_matrix(&idx), &ds.labels(), &ResampleConfig::default()).map_err(|e| e.to_string())?;
    let s = out.report.after_smote;
    let r = [s[0] as f64 / s[1] as f64, s[0] as f64 / s[2] as f64];
    for v in r {
        ensure((v / 27.0 - 1.0).abs() <= 0.10, format!("{before:?} -> {s:?}"))?;
    }
    Ok(format!(
        "{before:?} ({:.0}:1) -> {s:?} after SMOTE = {:.2}:1 / {:.2}:1",
        before[0] as f64 / before[1].max(1) as f64,
        r[0],
        r[1]
    ))
}

fn trend_config() -> ExperimentConfig {
    ExperimentConfig {
        history_s: vec![1.0],
        horizon_s: vec![1.0, 2.0, 3.0],
        models: ModelKind::ALL.to_vec(),
        stride: 10,
        search_budget: 1,
        search_space: SearchSpace::default(),
        split: SplitSpec {
            train_locations: vec![0, 1, 2],
            test_locations: vec![3, 4],
        },
        features: FeatureParams::default(),
        pipeline: PipelineConfig {
            gbdt: GbdtConfig {
                n_rounds: 40,
                max_leaves: 15,
                max_bins: 63,
                ..GbdtConfig::default()
            },
            encoder: TrainConfig {
                hidden: 8,
                epochs: 10,
                patience: 3,
                majority_cap: Some(3.0),
                ..TrainConfig::default()
            },
            cv_folds: 3,
            sequence_step: 5,
            seed: 7,
            ..PipelineConfig::default()
        },
    }
}

/// The shared 2,000-track run behind the horizon-trend and baseline checks.
fn trend_rows() -> Result<(Vec<SweepRow>, f64), String> {
    let start = Instant::now();
    let corpus = synthesize_corpus(&SynthConfig {
        n_locations: 5,
        tracks_per_location: 400,
        maneuver_rate: 0.2,
        class_skew: [30.0, 1.0, 1.0],
        cue_lead_s: 2.0,
        seed: 7,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let tracks: usize = corpus.iter().map(|c| c.0.tracks.len()).sum();
    ensure(tracks >= 2000, format!("only {tracks} tracks"))?;
    let out = sweep(&corpus, &trend_config()).map_err(|e| e.to_string())?;
    Ok((out.rows, start.elapsed().as_secs_f64()))
}

fn test_f1(rows: &[SweepRow], kind: ModelKind, t: f64) -> f64 {
    rows.iter()
        .find(|r| r.model == kind && r.horizon_s == t && r.best_w)
        .map_or(f64::NAN, |r| r.test.macro_f1)
}

fn horizon_trend(run: &Result<(Vec<SweepRow>, f64), String>) -> Check {
    let (rows, secs) = run.as_ref().map_err(Clone::clone)?;
    ensure(*secs < 600.0, format!("took {secs:.0}s"))?;
    let (t1, t3) = (test_f1(rows, ModelKind::Hybrid, 1.0), test_f1(rows, ModelKind::Hybrid, 3.0));
    ensure(t1 > t3, format!("hybrid T=1 {t1:.4} not above T=3 {t3:.4}"))?;
    ensure(t1 >= 0.90, format!("hybrid T=1 macro-F1 {t1:.4}"))?;
    Ok(format!("hybrid test macro-F1 T=1s {t1:.4} > T=3s {t3:.4} ({secs:.0}s)"))
}

fn hybrid_vs_baselines(run: &Result<(Vec<SweepRow>, f64), String>) -> Check {
    let (rows, _) = run.as_ref().map_err(Clone::clone)?;
    let mut parts = Vec::new();
    for t in [1.0, 2.0, 3.0] {
        let h = test_f1(rows, ModelKind::Hybrid, t);
        let g = test_f1(rows, ModelKind::GbdtOnly, t);
        let b = test_f1(rows, ModelKind::BilstmOnly, t);
        ensure(h >= g.max(b) - 0.02, format!("T={t}: hybrid {h:.4}, gbdt {g:.4}, bilstm {b:.4}"))?;
        parts.push(format!("T={t}s {h:.4}/{g:.4}/{b:.4}"));
    }
    Ok(format!("hybrid/gbdt/bilstm: {}", parts.join(", ")))
}

fn no_leakage() -> Check {
    let corpus = synthesize_corpus(&SynthConfig {
        n_locations: 4,
        tracks_per_location: 80,
        maneuver_rate: 0.2,
        class_skew: [30.0, 1.0, 1.0],
        cue_lead_s: 2.0,
        seed: 31,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let mut cfg = trend_config();
    cfg.horizon_s = vec![1.0, 3.0];
    cfg.split = SplitSpec {
        train_locations: vec![0, 1, 2],
        test_locations: vec![3],
    };
    cfg.pipeline.encoder.epochs = 3;
    cfg.pipeline.gbdt.n_rounds = 15;
    let base = sweep(&corpus, &cfg).map_err(|e| e.to_string())?;

    let mut perturbed = corpus.clone();
    let mut touched = 0;
    for (rec, events) in perturbed.iter_mut().filter(|e| e.0.location_id == 3) {
        for t in &mut rec.tracks {
            for f in &mut t.frames {
                f.x_velocity *= 1.05;
                f.y += 0.01;
                touched += 1;
            }
        }
        let dropped = rec.tracks.remove(0).track_id;
        events.retain(|e| e.track_id != dropped);
    }
    let moved = sweep(&perturbed, &cfg).map_err(|e| e.to_string())?;
    ensure(base.models.len() == moved.models.len(), "model count changed")?;
    for (a, b) in base.models.iter().zip(&moved.models) {
        ensure(
            a.to_bytes() == b.to_bytes(),
            format!("{} T={} artifact changed", a.kind.as_str(), a.horizon_s),
        )?;
    }
    let test_changed = base.rows.iter().zip(&moved.rows).any(|(a, b)| a.test != b.test);
    ensure(test_changed, "perturbation did not reach the test split")?;
    Ok(format!(
        "{} artifacts byte-identical after perturbing {touched} test frames",
        base.models.len()
    ))
}

fn sweep_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("models")] {
        for e in fs::read_dir(&sub).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_file() {
                out.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_lane-intent"))
            .args(["sweep", "--seed", "7", "--out"])
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())?;
        runs.push(sweep_files(&dir));
    }
    ensure(runs[0].len() >= 3, "sweep wrote too few files")?;
    ensure(runs[0] == runs[1], "outputs differ between runs")?;
    Ok(format!("{} files byte-identical across two `sweep --seed 7` runs", runs[0].len()))
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} criterion {n:>2} [{name}] {detail} [{secs:.1}s]");
    result.is_ok()
}

fn main() {
    println!("acceptance: 10 criteria");
    let mut ok = vec![
        report(1, "labeling oracle", labeling_oracle),
        report(2, "split oracle", split_oracle),
        report(3, "gain and softmax derivatives", gain_and_softmax),
        report(4, "bi-lstm gradients", bilstm_gradients),
        report(5, "imbalance suite", imbalance_suite),
        report(6, "imbalance ratio", ratio_reproduction),
    ];
    let run = trend_rows();
    ok.push(report(7, "horizon trend", || horizon_trend(&run)));
    ok.push(report(8, "hybrid vs baselines", || hybrid_vs_baselines(&run)));
    ok.push(report(9, "no leakage", no_leakage));
    ok.push(report(10, "cli determinism", cli_determinism));
    let passed = ok.iter().filter(|v| **v).count();
    println!("acceptance: {passed}/10 passed");
    if passed != ok.len() {
        std::process::exit(1);
    }
}
