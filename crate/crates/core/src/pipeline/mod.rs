//! End-to-end orchestration: location splits, dataset building, fusion of
//! embeddings with physics features, cross-validated training with
//! fold-wise threshold calibration, and horizon/window sweeps.

mod cv;
mod dataset;
mod search;
mod sweep;

use thiserror::Error;

use crate::artifact::{Artifact, ArtifactError, Decoder, Encoder};
use crate::bilstm::{BiLstmEncoder, BiLstmError, TrainConfig};
use crate::features::{FeatureError, FeatureVector, NeighborStats};
use crate::gbdt::{GbdtConfig, GbdtError, GbdtModel};
use crate::imbalance::{apply_thresholds, ImbalanceError, ResampleConfig, ThresholdSet};
use crate::ingest::{DatasetKind, Recording};
use crate::labeling::{Label, LabelError, LaneChangeEvent};
use crate::matrix::MatrixError;
use crate::metrics::MetricsError;

pub use cv::{
    cross_validate, fit_models, stratified_group_folds, train_hybrid, train_models, CvReport, FittedModel,
    FoldResult,
};
pub use dataset::{build_datasets, decimate, Dataset, Sample};
pub use search::{hyperparameter_search, ParamRange, SearchSpace};
pub use sweep::{evaluate, results_csv, results_text, sweep, ExperimentConfig, SweepOutput, SweepRow};

/// A recording with the lane changes found in it.
pub type LabeledRecording = (Recording, Vec<LaneChangeEvent>);

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("location {0} is assigned to neither or both sides of the split")]
    UnassignedLocation(u32),
    #[error("split needs nonempty, disjoint train and test location sets")]
    InvalidSplit,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("class {class} has {count} training sample(s); {folds} folds need at least {folds}")]
    TooFewSamplesPerClass { class: usize, count: usize, folds: usize },
    #[error("empty hyperparameter search space or zero budget")]
    EmptySpace,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no labeled windows in {0}")]
    EmptyDataset(&'static str),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    BiLstm(#[from] BiLstmError),
    #[error(transparent)]
    Imbalance(#[from] ImbalanceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    GbdtOnly,
    BilstmOnly,
    Hybrid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::GbdtOnly, ModelKind::BilstmOnly, ModelKind::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::GbdtOnly => "gbdt_only",
            ModelKind::BilstmOnly => "bilstm_only",
            ModelKind::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s.trim())
    }

    pub fn uses_encoder(self) -> bool {
        self != ModelKind::GbdtOnly
    }

    pub fn uses_gbdt(self) -> bool {
        self != ModelKind::BilstmOnly
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_locations: Vec<u32>,
    pub test_locations: Vec<u32>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.train_locations.is_empty()
            || self.test_locations.is_empty()
            || self.train_locations.iter().any(|l| self.test_locations.contains(l))
        {
            return Err(PipelineError::InvalidSplit);
        }
        Ok(())
    }
}

/// Partition recordings by location. Every recording's location must be on
/// exactly one side.
pub fn location_split<'a>(
    corpus: &'a [LabeledRecording],
    spec: &SplitSpec,
) -> Result<(Vec<&'a LabeledRecording>, Vec<&'a LabeledRecording>), PipelineError> {
    spec.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for entry in corpus {
        let loc = entry.0.location_id;
        match (spec.train_locations.contains(&loc), spec.test_locations.contains(&loc)) {
            (true, false) => train.push(entry),
            (false, true) => test.push(entry),
            _ => return Err(PipelineError::UnassignedLocation(loc)),
        }
    }
    Ok((train, test))
}

/// `[e ‖ f]`: the embedding followed by the physics features, missing
/// markers kept as they are.
pub fn fuse(e: &[f64], f: &FeatureVector, k: usize) -> Result<Vec<Option<f64>>, PipelineError> {
    if e.len() != k {
        return Err(PipelineError::SchemaMismatch(format!(
            "embedding has {} values, expected {k}",
            e.len()
        )));
    }
    let width = f.names().len();
    if f.values.len() != width {
        return Err(PipelineError::SchemaMismatch(format!(
            "feature vector has {} values, schema {width}",
            f.values.len()
        )));
    }
    let mut out = Vec::with_capacity(k + width);
    out.extend(e.iter().map(|&v| Some(v)));
    out.extend_from_slice(&f.values);
    Ok(out)
}

/// Everything that shapes training besides the model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub gbdt: GbdtConfig,
    pub encoder: TrainConfig,
    /// SMOTE + Tomek inside training folds and inverse-frequency class weights.
    pub imbalance: bool,
    pub resample: ResampleConfig,
    pub cv_folds: usize,
    /// Keep every `sequence_step`-th history frame (ending at the anchor) as
    /// encoder input.
    pub sequence_step: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gbdt: GbdtConfig::default(),
            encoder: TrainConfig::default(),
            imbalance: true,
            resample: ResampleConfig::default(),
            cv_folds: 5,
            sequence_step: 1,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.cv_folds < 2 {
            return Err(PipelineError::InvalidConfig("cv_folds must be at least 2".into()));
        }
        if self.sequence_step == 0 {
            return Err(PipelineError::InvalidConfig("sequence_step must be positive".into()));
        }
        self.gbdt.validate()?;
        self.encoder.validate()?;
        Ok(())
    }
}

/// Mix a master seed with a job tag (SplitMix64 finalizer).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deployable classifier for one `(W, T)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub kind: ModelKind,
    pub dataset_kind: DatasetKind,
    pub history_s: f64,
    pub horizon_s: f64,
    pub sampling_rate: f64,
    pub sequence_step: usize,
    /// Includes the input standardization.
    pub encoder: Option<BiLstmEncoder>,
    pub gbdt: Option<GbdtModel>,
    pub thresholds: ThresholdSet,
    pub neighbor_stats: NeighborStats,
    /// Columns the tree ensemble consumes, embeddings first.
    pub input_names: Vec<String>,
}

impl HybridModel {
    pub fn fitted(&self) -> FittedModel {
        FittedModel {
            kind: self.kind,
            encoder: self.encoder.clone(),
            gbdt: self.gbdt.clone(),
        }
    }

    pub fn predict_proba(&self, ds: &Dataset) -> Result<Vec<[f64; 3]>, PipelineError> {
        if ds.kind != self.dataset_kind {
            return Err(PipelineError::SchemaMismatch(format!(
                "model is for {} data, dataset is {}",
                self.dataset_kind.as_str(),
                ds.kind.as_str()
            )));
        }
        let idx: Vec<usize> = (0..ds.samples.len()).collect();
        self.fitted().predict_proba(ds, &idx)
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<Label>, PipelineError> {
        Ok(self
            .predict_proba(ds)?
            .iter()
            .map(|p| apply_thresholds(p, &self.thresholds))
            .collect())
    }
}

fn encode_nested<A: Artifact>(a: &A, e: &mut Encoder) {
    let bytes = a.to_bytes();
    e.len(bytes.len());
    e.buf.extend_from_slice(&bytes);
}

fn decode_nested<A: Artifact>(d: &mut Decoder<'_>) -> Result<A, ArtifactError> {
    let n = d.len(1)?;
    let mut bytes = Vec::with_capacity(n);
    for _ in 0..n {
        bytes.push(d.u8()?);
    }
    A::from_bytes(&bytes)
}

impl Artifact for HybridModel {
    const MAGIC: [u8; 4] = *b"LIHY";

    fn encode_body(&self, e: &mut Encoder) {
        e.str(self.kind.as_str());
        e.str(self.dataset_kind.as_str());
        e.f64(self.history_s);
        e.f64(self.horizon_s);
        e.f64(self.sampling_rate);
        e.len(self.sequence_step);
        match &self.encoder {
            Some(enc) => {
                e.bool(true);
                encode_nested(enc, e);
            }
            None => e.bool(false),
        }
        match &self.gbdt {
            Some(m) => {
                e.bool(true);
                encode_nested(m, e);
            }
            None => e.bool(false),
        }
        encode_nested(&self.thresholds, e);
        encode_nested(&self.neighbor_stats, e);
        e.len(self.input_names.len());
        self.input_names.iter().for_each(|n| e.str(n));
    }

    fn decode_body(d: &mut Decoder<'_>) -> Result<Self, ArtifactError> {
        let kind = d.str()?;
        let kind = ModelKind::parse(&kind).ok_or_else(|| ArtifactError::Invalid(format!("model kind `{kind}`")))?;
        let dk = d.str()?;
        let dataset_kind =
            DatasetKind::parse(&dk).ok_or_else(|| ArtifactError::Invalid(format!("dataset kind `{dk}`")))?;
        let history_s = d.f64()?;
        let horizon_s = d.f64()?;
        let sampling_rate = d.f64()?;
        let sequence_step = d.len(0)?;
        let encoder = if d.bool()? { Some(decode_nested(d)?) } else { None };
        let gbdt = if d.bool()? { Some(decode_nested(d)?) } else { None };
        let thresholds = decode_nested(d)?;
        let neighbor_stats = decode_nested(d)?;
        let n = d.len(8)?;
        let input_names = (0..n).map(|_| d.str()).collect::<Result<Vec<_>, _>>()?;
        if kind.uses_encoder() != encoder.is_some() || kind.uses_gbdt() != gbdt.is_some() {
            return Err(ArtifactError::Invalid(format!("{} model with wrong components", kind.as_str())));
        }
        Ok(HybridModel {
            kind,
            dataset_kind,
            history_s,
            horizon_s,
            sampling_rate,
            sequence_step,
            encoder,
            gbdt,
            thresholds,
            neighbor_stats,
            input_names,
        })
    }
}
