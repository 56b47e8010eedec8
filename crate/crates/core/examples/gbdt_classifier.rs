// Histogram gradient boosting on a three-class toy problem with a missing
// value column.

use lane_intent::gbdt::{train, GbdtConfig};
use lane_intent::imbalance::{argmax, inverse_frequency_weights};
use lane_intent::labeling::Label;
use lane_intent::matrix::FeatureMatrix;
use lane_intent::metrics::compute_metrics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x = FeatureMatrix::new(vec!["a".into(), "b".into()]);
    let mut y = Vec::new();
    for _ in 0..600 {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let label = if a > 0.6 {
            Label::LeftLC
        } else if a < -0.6 {
            Label::RightLC
        } else {
            Label::NoLC
        };
        // b carries no signal and is absent a third of the time
        x.push_row(&[Some(a), rng.gen_bool(0.67).then_some(b)])?;
        y.push(label);
    }
    let mut counts = [0; 3];
    y.iter().for_each(|l| counts[l.index()] += 1);
    let cfg = GbdtConfig {
        n_rounds: 30,
        max_leaves: 7,
        ..GbdtConfig::default()
    };
    let model = train(&x, &y, &inverse_frequency_weights(counts)?, &cfg)?;
    let pred: Vec<Label> = model.predict_proba(&x)?.iter().map(argmax).collect();
    let report = compute_metrics(&pred, &y)?;
    println!(
        "{} trees per class, training loss {:.4} -> {:.4}, macro-F1 {:.4}",
        model.trees.len(),
        model.loss_history[0],
        model.loss_history.last().copied().unwrap_or(f64::NAN),
        report.macro_f1
    );
    assert!(report.macro_f1 > 0.95);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
