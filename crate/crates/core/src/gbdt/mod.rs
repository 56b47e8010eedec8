//! Histogram gradient-boosted decision trees with a softmax objective.
//!
//! Trees grow leaf-wise on binned features; each split also learns where
//! missing values go. Per-sample weights scale gradients and Hessians.
//! Gradient-based one-side sampling can subsample each round.

mod bins;
mod goss;
mod objective;
mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imbalance::ClassWeights;
use crate::labeling::Label;
use crate::matrix::FeatureMatrix;

pub use bins::{fit_bins, BinMapper, BinnedMatrix};
pub use goss::{goss_select, GossSample};
pub use objective::{softmax, softmax_objective, ObjectiveOutput};
pub use tree::{best_split, build_histogram, grow_tree, leaf_value, split_gain, Histogram, Node, Split, Tree};

pub const N_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("feature matrix has no rows")]
    EmptyMatrix,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid sampling fractions a={a}, b={b}")]
    InvalidFractions { a: f64, b: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtConfig {
    pub max_bins: usize,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub n_rounds: usize,
    /// Enable gradient-based one-side sampling with fractions `goss_a`, `goss_b`.
    pub goss: bool,
    pub goss_a: f64,
    pub goss_b: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            max_bins: 255,
            max_leaves: 31,
            max_depth: 8,
            min_samples_leaf: 20,
            lambda: 1.0,
            gamma: 0.0,
            learning_rate: 0.1,
            n_rounds: 100,
            goss: false,
            goss_a: 0.2,
            goss_b: 0.1,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::InvalidConfig(m.to_owned()));
        if self.max_leaves == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return bad("max_leaves, max_depth and min_samples_leaf must be positive");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return bad("lambda and gamma must be nonnegative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.goss
            && !(self.goss_a > 0.0 && self.goss_b >= 0.0 && self.goss_a + self.goss_b <= 1.0)
        {
            return Err(GbdtError::InvalidFractions {
                a: self.goss_a,
                b: self.goss_b,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    pub mapper: BinMapper,
    pub base_scores: [f64; N_CLASSES],
    /// `trees[round][class]`.
    pub trees: Vec<Vec<Tree>>,
    pub class_weights: ClassWeights,
    /// Training loss before the first round and after each round.
    pub loss_history: Vec<f64>,
}

/// Train with per-class weights applied to every sample of that class.
pub fn train(
    x: &FeatureMatrix,
    y: &[Label],
    weights: &ClassWeights,
    cfg: &GbdtConfig,
) -> Result<GbdtModel, GbdtError> {
    let sample_weights: Vec<f64> = y.iter().map(|l| weights.of(*l)).collect();
    let mut model = train_weighted(x, y, &sample_weights, cfg)?;
    model.class_weights = *weights;
    Ok(model)
}

pub fn train_weighted(
    x: &FeatureMatrix,
    y: &[Label],
    sample_weights: &[f64],
    cfg: &GbdtConfig,
) -> Result<GbdtModel, GbdtError> {
    cfg.validate()?;
    let n = x.rows;
    if n == 0 {
        return Err(GbdtError::EmptyMatrix);
    }
    if y.len() != n || sample_weights.len() != n {
        return Err(GbdtError::ShapeMismatch(format!(
            "{n} rows, {} labels, {} weights",
            y.len(),
            sample_weights.len()
        )));
    }
    let mut counts = [0usize; N_CLASSES];
    y.iter().for_each(|l| counts[l.index()] += 1);
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(GbdtError::SingleClass);
    }
    let mut base_scores = [0.0; N_CLASSES];
    for c in 0..N_CLASSES {
        base_scores[c] = (counts[c] as f64 / n as f64).max(1e-12).ln();
    }

    let mapper = fit_bins(x, cfg.max_bins)?;
    let binned = mapper.transform(x);
    let labels: Vec<usize> = y.iter().map(|l| l.index()).collect();
    let mut logits: Vec<f64> = (0..n).flat_map(|_| base_scores).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut loss_history = Vec::with_capacity(cfg.n_rounds + 1);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];

    for _ in 0..cfg.n_rounds {
        let obj = softmax_objective(&logits, N_CLASSES, &labels, sample_weights);
        loss_history.push(obj.loss);
        let goss = if cfg.goss {
            let norms: Vec<f64> = obj
                .grad
                .chunks(N_CLASSES)
                .map(|r| r.iter().map(|v| v.abs()).sum())
                .collect();
            Some(goss_select(&norms, cfg.goss_a, cfg.goss_b, &mut rng)?)
        } else {
            None
        };
        let (indices, amp) = match &goss {
            Some(s) => (s.indices.as_slice(), Some(s.amplification.as_slice())),
            None => (all.as_slice(), None),
        };
        let mut round = Vec::with_capacity(N_CLASSES);
        for c in 0..N_CLASSES {
            for i in 0..n {
                g[i] = obj.grad[i * N_CLASSES + c];
                h[i] = obj.hess[i * N_CLASSES + c];
            }
            let tree = grow_tree(indices, &g, &h, amp, &binned, &mapper, cfg);
            for i in 0..n {
                logits[i * N_CLASSES + c] += cfg.learning_rate * tree.predict_binned(&binned, i);
            }
            round.push(tree);
        }
        trees.push(round);
    }
    loss_history.push(softmax_objective(&logits, N_CLASSES, &labels, sample_weights).loss);

    Ok(GbdtModel {
        config: cfg.clone(),
        mapper,
        base_scores,
        trees,
        class_weights: ClassWeights::uniform(),
        loss_history,
    })
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.mapper.n_features()
    }

    pub fn logits(&self, row: &[Option<f64>]) -> [f64; N_CLASSES] {
        let mut z = self.base_scores;
        for round in &self.trees {
            for (c, tree) in round.iter().enumerate() {
                z[c] += self.config.learning_rate * tree.predict(row);
            }
        }
        z
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<[f64; N_CLASSES]>, GbdtError> {
        if x.cols() != self.n_features() {
            return Err(GbdtError::ShapeMismatch(format!(
                "model expects {} features, matrix has {}",
                self.n_features(),
                x.cols()
            )));
        }
        Ok((0..x.rows)
            .map(|i| {
                let p = softmax(&self.logits(x.row(i)), N_CLASSES);
                [p[0], p[1], p[2]]
            })
            .collect())
    }
}
