// Train the fused encoder + tree model on three locations, score it on a
// held-out one, and round-trip the artifact.

use lane_intent::artifact::Artifact;
use lane_intent::bilstm::TrainConfig;
use lane_intent::features::{fit_neighbor_stats, FeatureParams};
use lane_intent::gbdt::GbdtConfig;
use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::pipeline::{
    build_datasets, evaluate, location_split, train_hybrid, HybridModel, PipelineConfig, SplitSpec,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synthesize_corpus(&SynthConfig {
        n_locations: 4,
        tracks_per_location: 80,
        maneuver_rate: 0.2,
        class_skew: [30.0, 1.0, 1.0],
        cue_lead_s: 2.0,
        seed: 9,
        ..SynthConfig::default()
    })?;
    let split = SplitSpec {
        train_locations: vec![0, 1, 2],
        test_locations: vec![3],
    };
    let (train, test) = location_split(&corpus, &split)?;
    let stats = fit_neighbor_stats(train.iter().map(|e| (&e.0, e.1.as_slice())));
    let cfg = PipelineConfig {
        gbdt: GbdtConfig {
            n_rounds: 30,
            max_leaves: 15,
            ..GbdtConfig::default()
        },
        encoder: TrainConfig {
            hidden: 8,
            epochs: 6,
            majority_cap: Some(3.0),
            ..TrainConfig::default()
        },
        cv_folds: 3,
        sequence_step: 5,
        seed: 9,
        ..PipelineConfig::default()
    };
    let params = FeatureParams::default();
    let tr = build_datasets(&train, 1.0, &[1.0], 10, &stats, params, cfg.sequence_step)?.remove(0);
    let te = build_datasets(&test, 1.0, &[1.0], 10, &stats, params, cfg.sequence_step)?.remove(0);
    let (model, cv) = train_hybrid(&tr, &stats, &cfg)?;
    let report = evaluate(&model, &te)?;
    println!(
        "train {:?}, test {:?}; cv macro-F1 {:.4}, test macro-F1 {:.4}",
        tr.class_counts(),
        te.class_counts(),
        cv.mean_macro_f1,
        report.macro_f1
    );
    let bytes = model.to_bytes();
    let back = HybridModel::from_bytes(&bytes)?;
    assert_eq!(back.predict(&te)?, model.predict(&te)?);
    println!("artifact: {} bytes, {} inputs", bytes.len(), model.input_names.len());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
