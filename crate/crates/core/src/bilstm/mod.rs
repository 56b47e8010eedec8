//! Two-layer bidirectional LSTM sequence encoder with a softmax head.
//!
//! The encoder is trained as a weighted three-class classifier; its pooled
//! second-layer output is used as a fixed-length embedding.

mod cell;
mod train;

use rand::Rng;
use thiserror::Error;

use crate::labeling::Sequence;
use crate::matrix::FeatureMatrix;

pub use cell::{lstm_cell, LstmParams};
pub use train::{train_encoder, TrainConfig, TrainedEncoder};

use cell::{backprop_direction, run_direction, DirectionCache};

pub const N_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum BiLstmError {
    #[error("sequence has no steps")]
    EmptySequence,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    #[default]
    Mean,
    Max,
    Last,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Mean => "mean",
            Pooling::Max => "max",
            Pooling::Last => "last",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Pooling::Mean),
            "max" => Some(Pooling::Max),
            "last" => Some(Pooling::Last),
            _ => None,
        }
    }
}

/// Forward and backward parameter sets of one bidirectional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl LayerParams {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        LayerParams {
            forward: LstmParams::zeros(d_in, hidden),
            backward: LstmParams::zeros(d_in, hidden),
        }
    }
}

/// Per-feature mean and standard deviation of the input frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population statistics over every frame of every sequence. Constant
    /// features get a unit scale.
    pub fn fit(seqs: &[&Sequence], dim: usize) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for s in seqs {
            for t in 0..s.steps {
                for (j, v) in s.row(t).iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Standardizer::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = (0..dim)
            .map(|j| {
                let var = (sq[j] / n as f64 - mean[j] * mean[j]).max(0.0);
                let s = var.sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, seq: &Sequence) -> Vec<f64> {
        let d = self.mean.len();
        seq.data
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % d]) / self.std[i % d])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmEncoder {
    pub d_in: usize,
    pub hidden: usize,
    pub layer1: LayerParams,
    pub layer2: LayerParams,
    pub pooling: Pooling,
    /// `3 × 2H`, row-major.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
    pub standardizer: Standardizer,
}

/// Run both directions of a layer and concatenate per step: `[fwd ‖ bwd]`.
pub fn bilstm_layer(xs: &[f64], steps: usize, params: &LayerParams) -> Result<Vec<f64>, BiLstmError> {
    if steps == 0 {
        return Err(BiLstmError::EmptySequence);
    }
    let d = params.forward.d_in;
    if xs.len() != steps * d || params.backward.d_in != d || params.backward.hidden != params.forward.hidden {
        return Err(BiLstmError::ShapeMismatch(format!(
            "layer expects {steps}×{d} input, got {} values",
            xs.len()
        )));
    }
    let f = run_direction(&params.forward, xs, steps, false);
    let b = run_direction(&params.backward, xs, steps, true);
    Ok(concat(&f, &b, steps, params.forward.hidden))
}

fn concat(f: &DirectionCache, b: &DirectionCache, steps: usize, hidden: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps * 2 * hidden);
    for t in 0..steps {
        out.extend_from_slice(f.h_at(t, hidden));
        out.extend_from_slice(b.h_at(t, hidden));
    }
    out
}

/// Pool a `steps × k` matrix into a `k`-vector. For max pooling also returns
/// the winning step per component.
pub fn pool(out: &[f64], steps: usize, k: usize, pooling: Pooling) -> (Vec<f64>, Vec<usize>) {
    match pooling {
        Pooling::Mean => {
            let mut e = vec![0.0; k];
            for t in 0..steps {
                for j in 0..k {
                    e[j] += out[t * k + j];
                }
            }
            e.iter_mut().for_each(|v| *v /= steps as f64);
            (e, Vec::new())
        }
        Pooling::Max => {
            let mut e = out[..k].to_vec();
            let mut arg = vec![0; k];
            for t in 1..steps {
                for j in 0..k {
                    if out[t * k + j] > e[j] {
                        e[j] = out[t * k + j];
                        arg[j] = t;
                    }
                }
            }
            (e, arg)
        }
        Pooling::Last => (out[(steps - 1) * k..steps * k].to_vec(), Vec::new()),
    }
}

struct ForwardCache {
    steps: usize,
    x: Vec<f64>,
    l1: (DirectionCache, DirectionCache),
    out1: Vec<f64>,
    l2: (DirectionCache, DirectionCache),
    emb: Vec<f64>,
    argmax: Vec<usize>,
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

fn init_direction(rng: &mut impl Rng, d_in: usize, hidden: usize) -> LstmParams {
    let mut b = vec![0.0; 4 * hidden];
    b[..hidden].iter_mut().for_each(|v| *v = 1.0);
    LstmParams {
        d_in,
        hidden,
        w: uniform(rng, 4 * hidden * d_in, 1.0 / (d_in as f64).sqrt()),
        u: uniform(rng, 4 * hidden * hidden, 1.0 / (hidden as f64).sqrt()),
        b,
    }
}

impl BiLstmEncoder {
    /// Seeded initialization: weights uniform in `±1/√fan_in`, forget-gate
    /// bias 1, other biases 0.
    pub fn init(d_in: usize, hidden: usize, pooling: Pooling, rng: &mut impl Rng) -> Self {
        let k = 2 * hidden;
        BiLstmEncoder {
            d_in,
            hidden,
            layer1: LayerParams {
                forward: init_direction(rng, d_in, hidden),
                backward: init_direction(rng, d_in, hidden),
            },
            layer2: LayerParams {
                forward: init_direction(rng, k, hidden),
                backward: init_direction(rng, k, hidden),
            },
            pooling,
            head_w: uniform(rng, N_CLASSES * k, 1.0 / (k as f64).sqrt()),
            head_b: vec![0.0; N_CLASSES],
            standardizer: Standardizer::identity(d_in),
        }
    }

    /// Same shapes, every tensor zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Embedding width `k = 2H`.
    pub fn embedding_dim(&self) -> usize {
        2 * self.hidden
    }

    /// All trainable tensors in a fixed order.
    pub fn tensors(&self) -> [&Vec<f64>; 14] {
        let (a, b) = (&self.layer1, &self.layer2);
        [
            &a.forward.w, &a.forward.u, &a.forward.b,
            &a.backward.w, &a.backward.u, &a.backward.b,
            &b.forward.w, &b.forward.u, &b.forward.b,
            &b.backward.w, &b.backward.u, &b.backward.b,
            &self.head_w, &self.head_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 14] {
        let (a, b) = (&mut self.layer1, &mut self.layer2);
        [
            &mut a.forward.w, &mut a.forward.u, &mut a.forward.b,
            &mut a.backward.w, &mut a.backward.u, &mut a.backward.b,
            &mut b.forward.w, &mut b.forward.u, &mut b.forward.b,
            &mut b.backward.w, &mut b.backward.u, &mut b.backward.b,
            &mut self.head_w, &mut self.head_b,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn check(&self, seq: &Sequence) -> Result<(), BiLstmError> {
        if seq.steps == 0 {
            return Err(BiLstmError::EmptySequence);
        }
        if seq.dim != self.d_in {
            return Err(BiLstmError::ShapeMismatch(format!(
                "encoder expects {} input features, sequence has {}",
                self.d_in, seq.dim
            )));
        }
        Ok(())
    }

    fn forward(&self, seq: &Sequence) -> ForwardCache {
        let steps = seq.steps;
        let hd = self.hidden;
        let x = self.standardizer.apply(seq);
        let l1 = (
            run_direction(&self.layer1.forward, &x, steps, false),
            run_direction(&self.layer1.backward, &x, steps, true),
        );
        let out1 = concat(&l1.0, &l1.1, steps, hd);
        let l2 = (
            run_direction(&self.layer2.forward, &out1, steps, false),
            run_direction(&self.layer2.backward, &out1, steps, true),
        );
        let out2 = concat(&l2.0, &l2.1, steps, hd);
        let (emb, argmax) = pool(&out2, steps, 2 * hd, self.pooling);
        ForwardCache {
            steps,
            x,
            l1,
            out1,
            l2,
            emb,
            argmax,
        }
    }

    /// Second-layer outputs (`T × 2H`) before pooling.
    pub fn layer_outputs(&self, seq: &Sequence) -> Result<Vec<f64>, BiLstmError> {
        self.check(seq)?;
        let c = self.forward(seq);
        Ok(concat(&c.l2.0, &c.l2.1, c.steps, self.hidden))
    }

    /// Standardize, run both layers and pool.
    pub fn encode(&self, seq: &Sequence) -> Result<Vec<f64>, BiLstmError> {
        self.check(seq)?;
        Ok(self.forward(seq).emb)
    }

    pub fn head_logits(&self, emb: &[f64]) -> [f64; N_CLASSES] {
        let k = self.embedding_dim();
        let mut z = [0.0; N_CLASSES];
        for c in 0..N_CLASSES {
            z[c] = self.head_b[c] + (0..k).map(|j| self.head_w[c * k + j] * emb[j]).sum::<f64>();
        }
        z
    }

    /// Class probabilities from the classifier head.
    pub fn predict_proba(&self, seq: &Sequence) -> Result<[f64; N_CLASSES], BiLstmError> {
        let emb = self.encode(seq)?;
        Ok(softmax3(self.head_logits(&emb)))
    }

    /// Weighted cross-entropy `(1/B) Σ w_i (−log p_{i,y_i})` over a batch and
    /// its gradient with respect to every tensor.
    pub fn loss_and_gradient(
        &self,
        batch: &[(&Sequence, usize)],
        sample_weights: &[f64],
    ) -> Result<(f64, BiLstmEncoder), BiLstmError> {
        if sample_weights.len() != batch.len() {
            return Err(BiLstmError::ShapeMismatch(format!(
                "{} samples, {} weights",
                batch.len(),
                sample_weights.len()
            )));
        }
        let mut grads = self.zeros_like();
        if batch.is_empty() {
            return Ok((0.0, grads));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for ((seq, y), &w) in batch.iter().zip(sample_weights) {
            self.check(seq)?;
            let cache = self.forward(seq);
            let p = softmax3(self.head_logits(&cache.emb));
            loss += w * -p[*y].max(f64::MIN_POSITIVE).ln();
            let mut dlogits = p;
            dlogits[*y] -= 1.0;
            dlogits.iter_mut().for_each(|v| *v *= w * scale);
            self.backward(&cache, &dlogits, &mut grads);
        }
        Ok((loss * scale, grads))
    }

    fn backward(&self, cache: &ForwardCache, dlogits: &[f64; N_CLASSES], grads: &mut BiLstmEncoder) {
        let hd = self.hidden;
        let k = 2 * hd;
        let steps = cache.steps;
        let mut demb = vec![0.0; k];
        for c in 0..N_CLASSES {
            grads.head_b[c] += dlogits[c];
            for j in 0..k {
                grads.head_w[c * k + j] += dlogits[c] * cache.emb[j];
                demb[j] += dlogits[c] * self.head_w[c * k + j];
            }
        }

        let (mut dh_f, mut dh_b) = (vec![0.0; steps * hd], vec![0.0; steps * hd]);
        let mut route = |t: usize, j: usize, g: f64| {
            if j < hd {
                dh_f[t * hd + j] += g;
            } else {
                dh_b[t * hd + j - hd] += g;
            }
        };
        match self.pooling {
            Pooling::Mean => {
                for t in 0..steps {
                    for j in 0..k {
                        route(t, j, demb[j] / steps as f64);
                    }
                }
            }
            Pooling::Max => {
                for j in 0..k {
                    route(cache.argmax[j], j, demb[j]);
                }
            }
            Pooling::Last => {
                for j in 0..k {
                    route(steps - 1, j, demb[j]);
                }
            }
        }

        let mut dout1 = vec![0.0; steps * k];
        backprop_direction(&self.layer2.forward, &cache.l2.0, &cache.out1, &dh_f, &mut grads.layer2.forward, &mut dout1);
        backprop_direction(&self.layer2.backward, &cache.l2.1, &cache.out1, &dh_b, &mut grads.layer2.backward, &mut dout1);

        for t in 0..steps {
            for j in 0..hd {
                dh_f[t * hd + j] = dout1[t * k + j];
                dh_b[t * hd + j] = dout1[t * k + hd + j];
            }
        }
        let mut dx = vec![0.0; cache.x.len()];
        backprop_direction(&self.layer1.forward, &cache.l1.0, &cache.x, &dh_f, &mut grads.layer1.forward, &mut dx);
        backprop_direction(&self.layer1.backward, &cache.l1.1, &cache.x, &dh_b, &mut grads.layer1.backward, &mut dx);
    }
}

pub(crate) fn softmax3(z: [f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Embed every sequence; row `i` is `encode(seqs[i])`. Columns are named
/// `emb_0 .. emb_{k-1}`.
pub fn embed_batch(seqs: &[&Sequence], encoder: &BiLstmEncoder) -> Result<FeatureMatrix, BiLstmError> {
    let k = encoder.embedding_dim();
    let mut m = FeatureMatrix::new((0..k).map(|j| format!("emb_{j}")).collect());
    m.data.reserve(seqs.len() * k);
    for s in seqs {
        let e = encoder.encode(s)?;
        m.data.extend(e.into_iter().map(Some));
        m.rows += 1;
    }
    Ok(m)
}
