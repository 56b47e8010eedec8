//! Labeled windows with their sequences and physics features.

use std::collections::HashMap;

use super::{LabeledRecording, PipelineError};
use crate::features::{extract, schema, FeatureContext, FeatureParams, NeighborStats};
use crate::ingest::DatasetKind;
use crate::labeling::{consistency_filter, label_windows, Label, LabelError, LaneChangeEvent, Sequence, WindowSpec};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub recording_id: u32,
    pub location_id: u32,
    pub track_id: u32,
    pub anchor_frame: u32,
    pub label: Label,
    /// Encoder input, already decimated.
    pub sequence: Sequence,
    pub features: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub history_s: f64,
    pub horizon_s: f64,
    pub sampling_rate: f64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn feature_names(&self) -> &'static [String] {
        schema(self.kind)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        self.samples.iter().for_each(|s| c[s.label.index()] += 1);
        c
    }

    /// Physics features of the indexed samples.
    pub fn feature_matrix(&self, idx: &[usize]) -> FeatureMatrix {
        let names = self.feature_names().to_vec();
        let width = names.len();
        let mut m = FeatureMatrix::new(names);
        m.data.reserve(idx.len() * width);
        for &i in idx {
            m.data.extend_from_slice(&self.samples[i].features);
        }
        m.rows = idx.len();
        m
    }

    pub fn sequences(&self, idx: &[usize]) -> Vec<&Sequence> {
        idx.iter().map(|&i| &self.samples[i].sequence).collect()
    }
}

/// Every `step`-th row, counted back from the last one, in time order.
pub fn decimate(seq: &Sequence, step: usize) -> Sequence {
    if step <= 1 {
        return seq.clone();
    }
    let rows: Vec<usize> = (0..seq.steps).rev().step_by(step).collect();
    let data = rows.iter().rev().flat_map(|&t| seq.row(t).to_vec()).collect();
    Sequence::new(rows.len(), seq.dim, data)
}

/// One dataset per horizon for a single history length. Windows whose
/// history overlaps a lane change in progress, or whose horizon holds two
/// event starts, are dropped; tracks too short for a window contribute
/// nothing. Features are computed once per anchor and shared across horizons.
pub fn build_datasets(
    entries: &[&LabeledRecording],
    history_s: f64,
    horizons: &[f64],
    stride: usize,
    stats: &NeighborStats,
    params: FeatureParams,
    sequence_step: usize,
) -> Result<Vec<Dataset>, PipelineError> {
    let first = entries.first().ok_or(PipelineError::EmptyDataset("corpus"))?;
    let kind = first.0.dataset_kind;
    let fs = first.0.sampling_rate;
    if let Some(e) = entries.iter().find(|e| e.0.dataset_kind != kind || e.0.sampling_rate != fs) {
        return Err(PipelineError::SchemaMismatch(format!(
            "recording {} differs in dataset kind or sampling rate",
            e.0.recording_id
        )));
    }
    let mut out: Vec<Dataset> = horizons
        .iter()
        .map(|&horizon_s| Dataset {
            kind,
            history_s,
            horizon_s,
            sampling_rate: fs,
            samples: Vec::new(),
        })
        .collect();

    for (rec, events) in entries.iter().map(|e| (&e.0, &e.1)) {
        for track in &rec.tracks {
            let track_events: Vec<LaneChangeEvent> =
                events.iter().filter(|e| e.track_id == track.track_id).copied().collect();
            let ctx = FeatureContext {
                recording: rec,
                track,
                events: &track_events,
                stats,
                params,
            };
            let mut cache: HashMap<u32, Vec<Option<f64>>> = HashMap::new();
            for (ds, &horizon_s) in out.iter_mut().zip(horizons) {
                let spec = WindowSpec {
                    history_s,
                    horizon_s,
                    stride,
                };
                let windows = match label_windows(track, &track_events, &spec, fs) {
                    Ok(w) => w,
                    Err(LabelError::TrackTooShort { .. }) => continue,
                    Err(e) => return Err(e.into()),
                };
                let h = spec.history_frames(fs);
                for w in consistency_filter(windows, &track_events, fs) {
                    let features = match cache.get(&w.anchor_frame) {
                        Some(f) => f.clone(),
                        None => {
                            let f = extract(&ctx, w.anchor_frame, h)?.values;
                            cache.insert(w.anchor_frame, f.clone());
                            f
                        }
                    };
                    ds.samples.push(Sample {
                        recording_id: rec.recording_id,
                        location_id: rec.location_id,
                        track_id: track.track_id,
                        anchor_frame: w.anchor_frame,
                        label: w.label,
                        sequence: decimate(&w.sequence, sequence_step),
                        features,
                    });
                }
            }
        }
    }
    Ok(out)
}
