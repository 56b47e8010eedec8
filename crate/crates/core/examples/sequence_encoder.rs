// Train the bidirectional LSTM encoder on sequences whose class shows up as
// a late drift, then embed them.

use lane_intent::bilstm::{embed_batch, train_encoder, TrainConfig};
use lane_intent::imbalance::ClassWeights;
use lane_intent::labeling::{Label, Sequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (steps, dim) = (10, 2);
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..150 {
        let label = Label::from_index(i % 3).ok_or("class")?;
        let drift = [0.0, 1.0, -1.0][label.index()];
        let data: Vec<f64> = (0..steps)
            .flat_map(|t| {
                let late = if t >= steps / 2 { drift } else { 0.0 };
                [late + rng.gen_range(-0.3..0.3), rng.gen_range(-1.0..1.0)]
            })
            .collect();
        seqs.push(Sequence::new(steps, dim, data));
        labels.push(label);
    }
    let refs: Vec<&Sequence> = seqs.iter().collect();
    let cfg = TrainConfig {
        hidden: 8,
        epochs: 40,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::default()
    };
    let trained = train_encoder(&refs, &labels, &ClassWeights::uniform(), &cfg)?;
    let emb = embed_batch(&refs, &trained.encoder)?;
    let correct = refs
        .iter()
        .zip(&labels)
        .filter(|(s, l)| {
            let p = trained.encoder.predict_proba(s).unwrap();
            lane_intent::imbalance::argmax(&p) == **l
        })
        .count();
    println!(
        "{} epochs, loss {:.4} -> {:.4}; embeddings {}x{}; head accuracy {:.3}",
        trained.epoch_losses.len(),
        trained.epoch_losses[0],
        trained.epoch_losses.last().copied().unwrap_or(f64::NAN),
        emb.rows,
        emb.cols(),
        correct as f64 / labels.len() as f64
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
