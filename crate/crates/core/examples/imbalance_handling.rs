// SMOTE and Tomek-link cleaning on a skewed set, class weights, and
// threshold calibration of minority-class probabilities.

use lane_intent::imbalance::{
    apply_thresholds, argmax, calibrate_thresholds, inverse_frequency_weights, resample, ResampleConfig,
};
use lane_intent::labeling::Label;
use lane_intent::matrix::FeatureMatrix;
use lane_intent::metrics::macro_f1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut x = FeatureMatrix::new(vec!["u".into(), "v".into()]);
    let mut y = Vec::new();
    for (label, n, cx) in [(Label::NoLC, 540, 0.0), (Label::LeftLC, 10, 2.0), (Label::RightLC, 8, -2.0)] {
        for _ in 0..n {
            x.push_row(&[Some(cx + rng.gen_range(-1.0..1.0)), Some(rng.gen_range(-1.0..1.0))])?;
            y.push(label);
        }
    }
    let out = resample(&x, &y, &ResampleConfig::default())?;
    print!("{}", out.report.summary());
    let w = inverse_frequency_weights(out.report.before)?;
    println!("class weights {:.3?}", w.0);

    // a weak scorer that underrates the minority classes
    let probs: Vec<[f64; 3]> = (0..x.rows)
        .map(|i| {
            let u = x.get(i, 0).unwrap_or(0.0);
            let l = 0.3 / (1.0 + (-(u - 1.5) * 3.0).exp());
            let r = 0.3 / (1.0 + ((u + 1.5) * 3.0).exp());
            [1.0 - l - r, l, r]
        })
        .collect();
    let taus = calibrate_thresholds(&probs, &y)?;
    let plain: Vec<Label> = probs.iter().map(argmax).collect();
    let tuned: Vec<Label> = probs.iter().map(|p| apply_thresholds(p, &taus)).collect();
    println!(
        "thresholds left {:.2} right {:.2}: macro-F1 {:.4} -> {:.4}",
        taus.left,
        taus.right,
        macro_f1(&plain, &y),
        macro_f1(&tuned, &y)
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
