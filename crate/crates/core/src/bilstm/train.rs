//! Mini-batch training of the encoder and its classifier head.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BiLstmEncoder, BiLstmError, Pooling, Standardizer};
use crate::imbalance::ClassWeights;
use crate::labeling::{Label, Sequence};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden units per direction.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub pooling: Pooling,
    /// Stop after this many epochs without a training-loss improvement; 0 disables.
    pub patience: usize,
    /// Per epoch, keep at most `cap × (minority total)` windows of the
    /// largest class, drawn afresh each epoch.
    pub majority_cap: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 32,
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            clip_norm: 1.0,
            pooling: Pooling::Mean,
            patience: 5,
            majority_cap: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), BiLstmError> {
        let bad = |m: &str| Err(BiLstmError::InvalidConfig(m.to_owned()));
        if self.hidden == 0 || self.batch_size == 0 {
            return bad("hidden and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return bad("learning_rate and clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.majority_cap.is_some_and(|c| !(c > 0.0)) {
            return bad("majority_cap must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEncoder {
    pub encoder: BiLstmEncoder,
    /// Mean training loss per completed epoch.
    pub epoch_losses: Vec<f64>,
}

fn epoch_indices(labels: &[Label], cap: Option<f64>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut counts = [0usize; 3];
    labels.iter().for_each(|l| counts[l.index()] += 1);
    let major = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    let others = labels.len() - counts[major];
    let mut idx: Vec<usize> = match cap {
        Some(cap) if ((cap * others as f64).ceil() as usize) < counts[major] => {
            let keep = (cap * others as f64).ceil() as usize;
            let major_idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].index() == major).collect();
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].index() != major).collect();
            idx.extend(sample(rng, major_idx.len(), keep).into_iter().map(|j| major_idx[j]));
            idx
        }
        _ => (0..labels.len()).collect(),
    };
    idx.shuffle(rng);
    idx
}

/// Train from a seeded initialization with momentum SGD and gradient-norm
/// clipping. Input standardization is fitted on `seqs` and stored in the encoder.
pub fn train_encoder(
    seqs: &[&Sequence],
    labels: &[Label],
    weights: &ClassWeights,
    cfg: &TrainConfig,
) -> Result<TrainedEncoder, BiLstmError> {
    cfg.validate()?;
    if seqs.len() != labels.len() {
        return Err(BiLstmError::ShapeMismatch(format!(
            "{} sequences, {} labels",
            seqs.len(),
            labels.len()
        )));
    }
    let mut present = [false; 3];
    labels.iter().for_each(|l| present[l.index()] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(BiLstmError::SingleClass);
    }
    let (steps, dim) = (seqs[0].steps, seqs[0].dim);
    if steps == 0 {
        return Err(BiLstmError::EmptySequence);
    }
    if let Some(s) = seqs.iter().find(|s| s.steps != steps || s.dim != dim) {
        return Err(BiLstmError::ShapeMismatch(format!(
            "sequences must all be {steps}×{dim}, found {}×{}",
            s.steps, s.dim
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut encoder = BiLstmEncoder::init(dim, cfg.hidden, cfg.pooling, &mut rng);
    encoder.standardizer = Standardizer::fit(seqs, dim);
    let mut velocity = encoder.zeros_like();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        let idx = epoch_indices(labels, cfg.majority_cap, &mut rng);
        let mut total = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            let batch: Vec<(&Sequence, usize)> = chunk.iter().map(|&i| (seqs[i], labels[i].index())).collect();
            let w: Vec<f64> = chunk.iter().map(|&i| weights.of(labels[i])).collect();
            let (loss, mut grads) = encoder.loss_and_gradient(&batch, &w)?;
            if !loss.is_finite() {
                return Err(BiLstmError::NonFiniteLoss(epoch));
            }
            total += loss * chunk.len() as f64;
            let norm = grads
                .tensors()
                .iter()
                .flat_map(|t| t.iter())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if !norm.is_finite() {
                return Err(BiLstmError::NonFiniteLoss(epoch));
            }
            let scale = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            for ((p, v), g) in encoder
                .tensors_mut()
                .into_iter()
                .zip(velocity.tensors_mut())
                .zip(grads.tensors_mut())
            {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                    *v = cfg.momentum * *v - cfg.learning_rate * scale * g;
                    *p += *v;
                }
            }
        }
        let epoch_loss = total / idx.len() as f64;
        epoch_losses.push(epoch_loss);
        if epoch_loss < best - 1e-4 {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainedEncoder {
        encoder,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> (Vec<Sequence>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 3;
            let slope = [0.0, 0.3, -0.3][c];
            let data: Vec<f64> = (0..10)
                .flat_map(|t| [slope * t as f64 + rng.gen_range(-0.2..0.2), rng.gen_range(-1.0..1.0)])
                .collect();
            seqs.push(Sequence::new(10, 2, data));
            labels.push(Label::from_index(c).unwrap());
        }
        (seqs, labels)
    }

    #[test]
    fn zero_epochs_return_initialization() {
        let (seqs, labels) = separable(30, 1);
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let cfg = TrainConfig { hidden: 4, epochs: 0, seed: 5, ..TrainConfig::default() };
        let t = train_encoder(&refs, &labels, &ClassWeights::uniform(), &cfg).unwrap();
        let init = BiLstmEncoder::init(2, 4, Pooling::Mean, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(t.encoder.tensors(), init.tensors());
        assert!(t.epoch_losses.is_empty());
    }

    #[test]
    fn separable_task_is_learned() {
        let (seqs, labels) = separable(200, 2);
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let cfg = TrainConfig {
            hidden: 8,
            epochs: 200,
            batch_size: 16,
            patience: 0,
            ..TrainConfig::default()
        };
        let t = train_encoder(&refs, &labels, &ClassWeights::uniform(), &cfg).unwrap();
        let correct = refs
            .iter()
            .zip(&labels)
            .filter(|(s, l)| crate::imbalance::argmax(&t.encoder.predict_proba(s).unwrap()) == **l)
            .count();
        assert!(correct as f64 / 200.0 >= 0.95, "accuracy {}", correct as f64 / 200.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let (seqs, _) = separable(6, 3);
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let err = train_encoder(&refs, &[Label::NoLC; 6], &ClassWeights::uniform(), &TrainConfig::default());
        assert_eq!(err.unwrap_err(), BiLstmError::SingleClass);
    }

    #[test]
    fn majority_cap_limits_epoch_size() {
        let mut labels = vec![Label::NoLC; 100];
        labels.extend([Label::LeftLC; 5]);
        labels.extend([Label::RightLC; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = epoch_indices(&labels, Some(3.0), &mut rng);
        assert_eq!(idx.len(), 40);
        assert_eq!(idx.iter().filter(|&&i| i >= 100).count(), 10);
        assert_eq!(epoch_indices(&labels, None, &mut rng).len(), 110);
    }
}
