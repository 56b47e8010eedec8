use std::collections::HashMap;

use lane_intent::artifact::Artifact;
use lane_intent::bilstm::TrainConfig;
use lane_intent::features::{fit_neighbor_stats, FeatureParams, STRAIGHT_WIDTH};
use lane_intent::gbdt::GbdtConfig;
use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::pipeline::{
    build_datasets, location_split, stratified_group_folds, sweep, train_hybrid, train_models, Dataset,
    ExperimentConfig, LabeledRecording, ModelKind, PipelineConfig, PipelineError, SearchSpace, SplitSpec,
};

fn corpus(n_locations: usize, seed: u64) -> Vec<LabeledRecording> {
    synthesize_corpus(&SynthConfig {
        n_locations,
        tracks_per_location: 80,
        maneuver_rate: 0.2,
        class_skew: [30.0, 1.0, 1.0],
        cue_lead_s: 2.0,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn small_pipeline(seed: u64) -> PipelineConfig {
    PipelineConfig {
        gbdt: GbdtConfig {
            n_rounds: 15,
            max_leaves: 7,
            max_bins: 31,
            ..GbdtConfig::default()
        },
        encoder: TrainConfig {
            hidden: 4,
            epochs: 2,
            majority_cap: Some(2.0),
            ..TrainConfig::default()
        },
        cv_folds: 3,
        sequence_step: 5,
        seed,
        ..PipelineConfig::default()
    }
}

fn dataset(entries: &[&LabeledRecording], step: usize) -> Dataset {
    let stats = fit_neighbor_stats(entries.iter().map(|e| (&e.0, e.1.as_slice())));
    build_datasets(entries, 1.0, &[1.0], 10, &stats, FeatureParams::default(), step).unwrap().remove(0)
}

fn split(train: &[u32], test: &[u32]) -> SplitSpec {
    SplitSpec {
        train_locations: train.to_vec(),
        test_locations: test.to_vec(),
    }
}

#[test]
fn location_splits_keep_tracks_apart() {
    let c = corpus(7, 1);
    let (train, test) = location_split(&c[..6], &split(&[0, 1, 2, 3], &[4, 5])).unwrap();
    assert_eq!((train.len(), test.len()), (4, 2));
    let (train, test) = location_split(&c, &split(&[0, 1, 2, 3], &[4, 5, 6])).unwrap();
    assert_eq!((train.len(), test.len()), (4, 3));
    for t in &test {
        assert!(train.iter().all(|r| r.0.recording_id != t.0.recording_id));
    }
    assert!(location_split(&c, &split(&[0, 1, 2, 3, 4], &[4, 5, 6])).is_err());
    assert!(matches!(
        location_split(&c, &split(&[0, 1, 2], &[4, 5, 6])),
        Err(PipelineError::UnassignedLocation(3))
    ));
}

#[test]
fn folds_never_split_a_track() {
    let c = corpus(3, 2);
    let refs: Vec<&LabeledRecording> = c.iter().collect();
    let ds = dataset(&refs, 1);
    let folds = stratified_group_folds(&ds, 5, 3);
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    for (s, &f) in ds.samples.iter().zip(&folds) {
        assert_eq!(*seen.entry((s.recording_id, s.track_id)).or_insert(f), f);
    }
    let mut per_fold = [[0usize; 3]; 5];
    for (s, &f) in ds.samples.iter().zip(&folds) {
        per_fold[f][s.label.index()] += 1;
    }
    assert!(per_fold.iter().all(|c| c[1] > 0 && c[2] > 0), "{per_fold:?}");
}

#[test]
fn degenerate_hybrid_predicts_class_priors() {
    let c = corpus(2, 4);
    let refs: Vec<&LabeledRecording> = c.iter().collect();
    let ds = dataset(&refs, 5);
    let mut cfg = small_pipeline(4);
    cfg.gbdt.n_rounds = 0;
    cfg.encoder.epochs = 0;
    cfg.imbalance = false;
    let stats = fit_neighbor_stats(refs.iter().map(|e| (&e.0, e.1.as_slice())));
    let (model, _) = train_hybrid(&ds, &stats, &cfg).unwrap();
    let n = ds.samples.len() as f64;
    let prior = ds.class_counts().map(|c| c as f64 / n);
    for p in model.predict_proba(&ds).unwrap() {
        for k in 0..3 {
            assert!((p[k] - prior[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn each_model_kind_sees_its_own_inputs() {
    let c = corpus(2, 5);
    let refs: Vec<&LabeledRecording> = c.iter().collect();
    let ds = dataset(&refs, 5);
    let cfg = small_pipeline(5);
    let stats = fit_neighbor_stats(refs.iter().map(|e| (&e.0, e.1.as_slice())));
    let specs: Vec<_> = ModelKind::ALL.iter().map(|&k| (k, cfg.gbdt.clone())).collect();
    let k = 2 * cfg.encoder.hidden;
    for (model, _) in train_models(&ds, &specs, &stats, &cfg).unwrap() {
        match model.kind {
            ModelKind::GbdtOnly => {
                assert!(model.encoder.is_none());
                assert_eq!(model.gbdt.as_ref().unwrap().n_features(), STRAIGHT_WIDTH);
            }
            ModelKind::BilstmOnly => {
                assert!(model.gbdt.is_none());
                assert_eq!(model.encoder.as_ref().unwrap().d_in, 8);
            }
            ModelKind::Hybrid => {
                assert_eq!(model.gbdt.as_ref().unwrap().n_features(), k + STRAIGHT_WIDTH);
                assert_eq!(model.input_names.len(), k + STRAIGHT_WIDTH);
                assert!(model.input_names[0].starts_with("emb_"));
            }
        }
    }
}

fn leakage_config() -> ExperimentConfig {
    ExperimentConfig {
        history_s: vec![1.0],
        horizon_s: vec![1.0],
        models: vec![ModelKind::Hybrid],
        stride: 10,
        search_budget: 1,
        search_space: SearchSpace::default(),
        split: split(&[0, 1], &[2]),
        features: FeatureParams::default(),
        pipeline: small_pipeline(6),
    }
}

fn perturb_location(c: &mut [LabeledRecording], loc: u32) {
    for (rec, events) in c.iter_mut().filter(|e| e.0.location_id == loc) {
        for t in &mut rec.tracks {
            for f in &mut t.frames {
                f.x_velocity += 0.7;
                f.x_acceleration -= 0.1;
            }
        }
        let dropped = rec.tracks.pop().unwrap().track_id;
        events.retain(|e| e.track_id != dropped);
    }
}

#[test]
fn test_locations_never_reach_fitted_artifacts() {
    let cfg = leakage_config();
    let base = corpus(3, 6);
    let a = sweep(&base, &cfg).unwrap();

    let mut moved = base.clone();
    perturb_location(&mut moved, 2);
    let b = sweep(&moved, &cfg).unwrap();
    assert_eq!(a.models[0].to_bytes(), b.models[0].to_bytes());

    let mut moved = base.clone();
    perturb_location(&mut moved, 0);
    let c = sweep(&moved, &cfg).unwrap();
    assert_ne!(a.models[0].to_bytes(), c.models[0].to_bytes());
}

#[test]
fn sweep_is_deterministic() {
    let cfg = leakage_config();
    let c = corpus(3, 7);
    let a = sweep(&c, &cfg).unwrap();
    let b = sweep(&c, &cfg).unwrap();
    assert_eq!(a.rows, b.rows);
    for (x, y) in a.models.iter().zip(&b.models) {
        assert_eq!(x.to_bytes(), y.to_bytes());
    }
}
