// Sweep the prediction horizon for the tree model alone and print the
// results table.

use lane_intent::features::FeatureParams;
use lane_intent::gbdt::GbdtConfig;
use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::pipeline::{
    results_text, sweep, ExperimentConfig, ModelKind, PipelineConfig, SearchSpace, SplitSpec,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synthesize_corpus(&SynthConfig {
        n_locations: 4,
        tracks_per_location: 80,
        maneuver_rate: 0.2,
        class_skew: [30.0, 1.0, 1.0],
        cue_lead_s: 2.0,
        seed: 12,
        ..SynthConfig::default()
    })?;
    let cfg = ExperimentConfig {
        history_s: vec![0.5, 1.0],
        horizon_s: vec![1.0, 3.0],
        models: vec![ModelKind::GbdtOnly],
        stride: 10,
        search_budget: 1,
        search_space: SearchSpace::default(),
        split: SplitSpec {
            train_locations: vec![0, 1, 2],
            test_locations: vec![3],
        },
        features: FeatureParams::default(),
        pipeline: PipelineConfig {
            gbdt: GbdtConfig {
                n_rounds: 30,
                max_leaves: 15,
                ..GbdtConfig::default()
            },
            cv_folds: 3,
            seed: 12,
            ..PipelineConfig::default()
        },
    };
    let out = sweep(&corpus, &cfg)?;
    for r in &out.rows {
        println!(
            "W={}s T={}s test macro-F1 {:.4}{}",
            r.history_s,
            r.horizon_s,
            r.test.macro_f1,
            if r.best_w { "  (best W)" } else { "" }
        );
    }
    print!("\n{}", results_text(&out.rows));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
