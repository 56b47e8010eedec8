//! Model fitting, grouped stratified cross-validation and final training.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, Dataset, HybridModel, ModelKind, PipelineConfig, PipelineError};
use crate::bilstm::{embed_batch, train_encoder, BiLstmEncoder};
use crate::features::NeighborStats;
use crate::gbdt::{self, GbdtConfig, GbdtModel};
use crate::imbalance::{
    apply_thresholds, calibrate_thresholds, class_counts, inverse_frequency_weights, resample, ClassWeights,
    ThresholdSet, ARGMAX_EQUIVALENT,
};
use crate::labeling::{Label, SEQUENCE_FEATURES};
use crate::metrics::{compute_metrics, MetricsReport};

/// Fold id per sample. Windows of one track (same recording and track id)
/// share a fold; groups are placed greedily so every class spreads evenly.
pub fn stratified_group_folds(ds: &Dataset, k: usize, seed: u64) -> Vec<usize> {
    let mut index: HashMap<(u32, u32), usize> = HashMap::new();
    let mut groups: Vec<(Vec<usize>, [usize; 3])> = Vec::new();
    for (i, s) in ds.samples.iter().enumerate() {
        let g = *index.entry((s.recording_id, s.track_id)).or_insert_with(|| {
            groups.push((Vec::new(), [0; 3]));
            groups.len() - 1
        });
        groups[g].0.push(i);
        groups[g].1[s.label.index()] += 1;
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|&g| std::cmp::Reverse((groups[g].1[1] + groups[g].1[2], groups[g].0.len())));

    let totals = ds.class_counts();
    let mut fold_counts = vec![[0usize; 3]; k];
    let mut fold_sizes = vec![0usize; k];
    let mut fold_of = vec![0; ds.samples.len()];
    for g in order {
        let (members, counts) = &groups[g];
        let load = |f: usize| -> f64 {
            (0..3)
                .filter(|&c| counts[c] > 0)
                .map(|c| fold_counts[f][c] as f64 / totals[c] as f64)
                .sum()
        };
        let best = (0..k)
            .min_by(|&a, &b| {
                load(a)
                    .total_cmp(&load(b))
                    .then(fold_sizes[a].cmp(&fold_sizes[b]))
                    .then(a.cmp(&b))
            })
            .unwrap_or(0);
        for c in 0..3 {
            fold_counts[best][c] += counts[c];
        }
        fold_sizes[best] += members.len();
        for &i in members {
            fold_of[i] = best;
        }
    }
    fold_of
}

/// The trained components of one model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub encoder: Option<BiLstmEncoder>,
    pub gbdt: Option<GbdtModel>,
}

impl FittedModel {
    fn gbdt_input(&self, ds: &Dataset, idx: &[usize]) -> Result<crate::matrix::FeatureMatrix, PipelineError> {
        let physics = ds.feature_matrix(idx);
        let x = match (&self.kind, &self.encoder) {
            (ModelKind::Hybrid, Some(enc)) => embed_batch(&ds.sequences(idx), enc)?.hstack(&physics)?,
            _ => physics,
        };
        let expected = ds.feature_names().len()
            + match (self.kind, &self.encoder) {
                (ModelKind::Hybrid, Some(enc)) => enc.embedding_dim(),
                _ => 0,
            };
        if x.cols() != expected {
            return Err(PipelineError::SchemaMismatch(format!(
                "{} input has {} columns, expected {expected}",
                self.kind.as_str(),
                x.cols()
            )));
        }
        Ok(x)
    }

    pub fn predict_proba(&self, ds: &Dataset, idx: &[usize]) -> Result<Vec<[f64; 3]>, PipelineError> {
        match (self.kind, &self.encoder, &self.gbdt) {
            (ModelKind::BilstmOnly, Some(enc), _) => idx
                .iter()
                .map(|&i| enc.predict_proba(&ds.samples[i].sequence).map_err(Into::into))
                .collect(),
            (ModelKind::GbdtOnly | ModelKind::Hybrid, _, Some(m)) => {
                let x = self.gbdt_input(ds, idx)?;
                Ok(m.predict_proba(&x)?)
            }
            _ => Err(PipelineError::InvalidConfig(format!(
                "{} model is missing a component",
                self.kind.as_str()
            ))),
        }
    }
}

/// Inverse-frequency weights scaled to average one over the samples, with
/// the largest class counted as it appears after the per-epoch cap.
fn encoder_weights(counts: [usize; 3], cap: Option<f64>) -> ClassWeights {
    let mut c = counts;
    let major = (0..3).max_by_key(|&i| (c[i], std::cmp::Reverse(i))).unwrap_or(0);
    let others: usize = c.iter().sum::<usize>() - c[major];
    if let Some(cap) = cap {
        c[major] = c[major].min((cap * others as f64).ceil() as usize);
    }
    let total: usize = c.iter().sum();
    let present = c.iter().filter(|&&n| n > 0).count().max(1);
    let mut w = [1.0; 3];
    for i in 0..3 {
        if c[i] > 0 {
            w[i] = total as f64 / (present as f64 * c[i] as f64);
        }
    }
    ClassWeights(w)
}

fn gbdt_weights(counts: [usize; 3]) -> ClassWeights {
    inverse_frequency_weights(counts).unwrap_or_else(|_| {
        let total: usize = counts.iter().sum();
        ClassWeights(counts.map(|n| if n > 0 { total as f64 / n as f64 } else { 1.0 }))
    })
}

/// Fit every requested kind on the indexed samples. Kinds that need the
/// encoder share one encoder trained on these samples.
pub fn fit_models(
    ds: &Dataset,
    idx: &[usize],
    specs: &[(ModelKind, GbdtConfig)],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Vec<FittedModel>, PipelineError> {
    let y: Vec<Label> = idx.iter().map(|&i| ds.samples[i].label).collect();
    let counts = class_counts(&y);
    let encoder = if specs.iter().any(|(k, _)| k.uses_encoder()) {
        let weights = if cfg.imbalance {
            encoder_weights(counts, cfg.encoder.majority_cap)
        } else {
            ClassWeights::uniform()
        };
        let enc_cfg = crate::bilstm::TrainConfig {
            seed: derive_seed(seed, 1),
            ..cfg.encoder.clone()
        };
        Some(train_encoder(&ds.sequences(idx), &y, &weights, &enc_cfg)?.encoder)
    } else {
        None
    };

    let mut out = Vec::with_capacity(specs.len());
    for (kind, gcfg) in specs {
        let mut fitted = FittedModel {
            kind: *kind,
            encoder: if kind.uses_encoder() { encoder.clone() } else { None },
            gbdt: None,
        };
        if kind.uses_gbdt() {
            let x = fitted.gbdt_input(ds, idx)?;
            let gcfg = GbdtConfig {
                seed: derive_seed(seed, 2),
                ..gcfg.clone()
            };
            let model = if cfg.imbalance {
                let weights = gbdt_weights(counts);
                let rcfg = crate::imbalance::ResampleConfig {
                    seed: derive_seed(seed, 3),
                    ..cfg.resample
                };
                if counts.iter().all(|&n| n >= 2) {
                    let r = resample(&x, &y, &rcfg)?;
                    gbdt::train(&r.x, &r.y, &weights, &gcfg)?
                } else {
                    gbdt::train(&x, &y, &weights, &gcfg)?
                }
            } else {
                gbdt::train(&x, &y, &ClassWeights::uniform(), &gcfg)?
            };
            fitted.gbdt = Some(model);
        }
        out.push(fitted);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub thresholds: ThresholdSet,
    /// Validation metrics with the fold's own thresholds.
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub kind: ModelKind,
    pub folds: Vec<FoldResult>,
    /// Per-class mean of the fold thresholds.
    pub thresholds: ThresholdSet,
    pub mean_macro_f1: f64,
}

/// Per-class arithmetic mean.
pub fn average_thresholds(sets: &[ThresholdSet]) -> ThresholdSet {
    if sets.is_empty() {
        return ThresholdSet::default();
    }
    let n = sets.len() as f64;
    ThresholdSet {
        left: sets.iter().map(|t| t.left).sum::<f64>() / n,
        right: sets.iter().map(|t| t.right).sum::<f64>() / n,
    }
}

/// k-fold cross-validation grouped by track. Resampling happens only inside
/// each training fold; thresholds are calibrated on the held-out fold.
pub fn cross_validate(
    ds: &Dataset,
    specs: &[(ModelKind, GbdtConfig)],
    cfg: &PipelineConfig,
) -> Result<Vec<CvReport>, PipelineError> {
    cfg.validate()?;
    let k = cfg.cv_folds;
    let counts = ds.class_counts();
    if let Some(c) = (0..3).find(|&c| counts[c] < k) {
        return Err(PipelineError::TooFewSamplesPerClass {
            class: c,
            count: counts[c],
            folds: k,
        });
    }
    let fold_of = stratified_group_folds(ds, k, derive_seed(cfg.seed, 99));
    let mut folds: Vec<Vec<FoldResult>> = vec![Vec::new(); specs.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
        let val: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
        if val.is_empty() {
            continue;
        }
        let val_y: Vec<Label> = val.iter().map(|&i| ds.samples[i].label).collect();
        let fitted = fit_models(ds, &train, specs, cfg, derive_seed(cfg.seed, 100 + f as u64))?;
        for (m, model) in fitted.iter().enumerate() {
            let probs = model.predict_proba(ds, &val)?;
            let thresholds = calibrate_thresholds(&probs, &val_y).unwrap_or(ThresholdSet {
                left: ARGMAX_EQUIVALENT,
                right: ARGMAX_EQUIVALENT,
            });
            let pred: Vec<Label> = probs.iter().map(|p| apply_thresholds(p, &thresholds)).collect();
            folds[m].push(FoldResult {
                thresholds,
                metrics: compute_metrics(&pred, &val_y)?,
            });
        }
    }
    Ok(specs
        .iter()
        .zip(folds)
        .map(|((kind, _), folds)| {
            let sets: Vec<ThresholdSet> = folds.iter().map(|f| f.thresholds).collect();
            let mean_macro_f1 = folds.iter().map(|f| f.metrics.macro_f1).sum::<f64>() / folds.len().max(1) as f64;
            CvReport {
                kind: *kind,
                thresholds: average_thresholds(&sets),
                mean_macro_f1,
                folds,
            }
        })
        .collect())
}

fn input_names(kind: ModelKind, ds: &Dataset, encoder: Option<&BiLstmEncoder>) -> Vec<String> {
    match kind {
        ModelKind::BilstmOnly => SEQUENCE_FEATURES.iter().map(|s| s.to_string()).collect(),
        ModelKind::GbdtOnly => ds.feature_names().to_vec(),
        ModelKind::Hybrid => {
            let k = encoder.map_or(0, BiLstmEncoder::embedding_dim);
            (0..k)
                .map(|j| format!("emb_{j}"))
                .chain(ds.feature_names().iter().cloned())
                .collect()
        }
    }
}

/// Cross-validate for thresholds, then fit each kind on all samples.
pub fn train_models(
    ds: &Dataset,
    specs: &[(ModelKind, GbdtConfig)],
    stats: &NeighborStats,
    cfg: &PipelineConfig,
) -> Result<Vec<(HybridModel, CvReport)>, PipelineError> {
    if ds.samples.is_empty() {
        return Err(PipelineError::EmptyDataset("training split"));
    }
    let reports = cross_validate(ds, specs, cfg)?;
    let all: Vec<usize> = (0..ds.samples.len()).collect();
    let fitted = fit_models(ds, &all, specs, cfg, derive_seed(cfg.seed, 0))?;
    Ok(fitted
        .into_iter()
        .zip(reports)
        .map(|(f, report)| {
            let model = HybridModel {
                kind: f.kind,
                dataset_kind: ds.kind,
                history_s: ds.history_s,
                horizon_s: ds.horizon_s,
                sampling_rate: ds.sampling_rate,
                sequence_step: cfg.sequence_step,
                input_names: input_names(f.kind, ds, f.encoder.as_ref()),
                encoder: f.encoder,
                gbdt: f.gbdt,
                thresholds: report.thresholds,
                neighbor_stats: *stats,
            };
            (model, report)
        })
        .collect())
}

pub fn train_hybrid(
    ds: &Dataset,
    stats: &NeighborStats,
    cfg: &PipelineConfig,
) -> Result<(HybridModel, CvReport), PipelineError> {
    let mut v = train_models(ds, &[(ModelKind::Hybrid, cfg.gbdt.clone())], stats, cfg)?;
    Ok(v.remove(0))
}
