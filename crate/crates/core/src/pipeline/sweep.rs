//! Sweeps over history windows, horizons and model kinds, with result tables.

use std::fmt::Write as _;

use super::cv::train_models;
use super::{
    build_datasets, cross_validate, derive_seed, hyperparameter_search, location_split, Dataset, HybridModel,
    LabeledRecording, ModelKind, PipelineConfig, PipelineError, SearchSpace, SplitSpec,
};
use crate::features::{fit_neighbor_stats, FeatureParams};
use crate::gbdt::GbdtConfig;
use crate::imbalance::ThresholdSet;
use crate::metrics::{compute_metrics, MetricsReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// History lengths W (s).
    pub history_s: Vec<f64>,
    /// Prediction horizons T (s).
    pub horizon_s: Vec<f64>,
    pub models: Vec<ModelKind>,
    /// Anchor spacing in frames.
    pub stride: usize,
    /// Candidates per tree-ensemble search; 1 trains the base configuration.
    pub search_budget: usize,
    pub search_space: SearchSpace,
    pub split: SplitSpec,
    pub features: FeatureParams,
    pub pipeline: PipelineConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|x| *x > 0.0);
        if !positive(&self.history_s) || !positive(&self.horizon_s) {
            return Err(PipelineError::InvalidConfig(
                "history and horizon lists must be nonempty and positive".into(),
            ));
        }
        if self.models.is_empty() || self.stride == 0 || self.search_budget == 0 {
            return Err(PipelineError::InvalidConfig(
                "models, stride and search_budget must be nonempty/positive".into(),
            ));
        }
        self.split.validate()?;
        self.pipeline.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub model: ModelKind,
    pub history_s: f64,
    pub horizon_s: f64,
    /// Highest test macro-F1 among the rows sharing this model and horizon.
    pub best_w: bool,
    pub cv_macro_f1: f64,
    pub thresholds: ThresholdSet,
    pub train: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// The trained model behind each row, same order.
    pub models: Vec<HybridModel>,
}

/// Thresholded predictions scored against the dataset labels.
pub fn evaluate(model: &HybridModel, ds: &Dataset) -> Result<MetricsReport, PipelineError> {
    let pred = model.predict(ds)?;
    Ok(compute_metrics(&pred, &ds.labels())?)
}

/// Train and score every (model, W, T) cell on a location split. All fitted
/// statistics come from the training locations only.
pub fn sweep(corpus: &[LabeledRecording], cfg: &ExperimentConfig) -> Result<SweepOutput, PipelineError> {
    cfg.validate()?;
    let (train, test) = location_split(corpus, &cfg.split)?;
    if train.is_empty() {
        return Err(PipelineError::EmptyDataset("training locations"));
    }
    if test.is_empty() {
        return Err(PipelineError::EmptyDataset("test locations"));
    }
    let stats = fit_neighbor_stats(train.iter().map(|e| (&e.0, e.1.as_slice())));
    let step = cfg.pipeline.sequence_step;
    let n_t = cfg.horizon_s.len();

    let mut cells: Vec<(usize, usize, usize, SweepRow, HybridModel)> = Vec::new();
    for (iw, &w) in cfg.history_s.iter().enumerate() {
        let train_ds = build_datasets(&train, w, &cfg.horizon_s, cfg.stride, &stats, cfg.features, step)?;
        let test_ds = build_datasets(&test, w, &cfg.horizon_s, cfg.stride, &stats, cfg.features, step)?;
        for (it, (tr, te)) in train_ds.iter().zip(&test_ds).enumerate() {
            if tr.samples.is_empty() {
                return Err(PipelineError::EmptyDataset("training split"));
            }
            if te.samples.is_empty() {
                return Err(PipelineError::EmptyDataset("test split"));
            }
            let cell_cfg = PipelineConfig {
                seed: derive_seed(cfg.pipeline.seed, (iw * n_t + it) as u64),
                ..cfg.pipeline.clone()
            };
            let mut specs: Vec<(ModelKind, GbdtConfig)> = Vec::new();
            for &kind in &cfg.models {
                let g = if kind.uses_gbdt() && cfg.search_budget > 1 {
                    hyperparameter_search(
                        &cfg.search_space,
                        &cell_cfg.gbdt,
                        cfg.search_budget,
                        derive_seed(cell_cfg.seed, 7),
                        |c| Ok(cross_validate(tr, &[(kind, c.clone())], &cell_cfg)?[0].mean_macro_f1),
                    )?
                    .0
                } else {
                    cell_cfg.gbdt.clone()
                };
                specs.push((kind, g));
            }
            for (model, report) in train_models(tr, &specs, &stats, &cell_cfg)? {
                let row = SweepRow {
                    dataset: tr.kind.as_str().to_owned(),
                    model: model.kind,
                    history_s: w,
                    horizon_s: tr.horizon_s,
                    best_w: false,
                    cv_macro_f1: report.mean_macro_f1,
                    thresholds: model.thresholds,
                    train: evaluate(&model, tr)?,
                    test: evaluate(&model, te)?,
                };
                let mi = cfg.models.iter().position(|k| *k == model.kind).unwrap_or(0);
                cells.push((mi, iw, it, row, model));
            }
        }
    }
    cells.sort_by_key(|c| (c.0, c.2, c.1));

    let mut rows: Vec<SweepRow> = Vec::with_capacity(cells.len());
    let mut models = Vec::with_capacity(cells.len());
    for (_, _, _, row, model) in cells {
        rows.push(row);
        models.push(model);
    }
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].model == rows[i].model && rows[j].horizon_s == rows[i].horizon_s {
            j += 1;
        }
        let best = (i..j).fold(i, |b, k| if rows[k].test.macro_f1 > rows[b].test.macro_f1 { k } else { b });
        rows[best].best_w = true;
        i = j;
    }
    Ok(SweepOutput { rows, models })
}

/// Every row with train and test metrics, comma-separated.
pub fn results_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "dataset,model,history_s,horizon_s,best_w,cv_macro_f1,tau_left,tau_right,\
         train_accuracy,train_macro_f1,train_f1_no_lc,train_f1_left_lc,train_f1_right_lc,\
         test_accuracy,test_macro_f1,test_f1_no_lc,test_f1_left_lc,test_f1_right_lc\n",
    );
    for r in rows {
        let m = |m: &MetricsReport| {
            format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6}",
                m.accuracy, m.macro_f1, m.f1[0], m.f1[1], m.f1[2]
            )
        };
        writeln!(
            s,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            r.dataset,
            r.model.as_str(),
            r.history_s,
            r.horizon_s,
            r.best_w,
            r.cv_macro_f1,
            r.thresholds.left,
            r.thresholds.right,
            m(&r.train),
            m(&r.test)
        )
        .unwrap();
    }
    s
}

/// Aligned tables of the best-window test rows, one table per model.
pub fn results_text(rows: &[SweepRow]) -> String {
    const HEAD: [&str; 7] = [
        "Dataset",
        "Prediction Horizon",
        "Overall Accuracy",
        "Macro F1",
        "NO-LC F1",
        "Left-LC F1",
        "Right-LC F1",
    ];
    let mut out = String::new();
    let mut seen: Vec<ModelKind> = Vec::new();
    for r in rows {
        if !seen.contains(&r.model) {
            seen.push(r.model);
        }
    }
    for kind in seen {
        let best: Vec<&SweepRow> = rows.iter().filter(|r| r.model == kind && r.best_w).collect();
        let cells: Vec<[String; 7]> = best
            .iter()
            .map(|r| {
                [
                    r.dataset.clone(),
                    format!("{}s", r.horizon_s),
                    format!("{:.4}", r.test.accuracy),
                    format!("{:.4}", r.test.macro_f1),
                    format!("{:.4}", r.test.f1[0]),
                    format!("{:.4}", r.test.f1[1]),
                    format!("{:.4}", r.test.f1[2]),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..7)
            .map(|j| cells.iter().map(|c| c[j].len()).chain([HEAD[j].len()]).max().unwrap_or(0))
            .collect();
        let windows: Vec<String> = best.iter().map(|r| format!("T={}s W={}s", r.horizon_s, r.history_s)).collect();
        writeln!(out, "{} ({})", kind.as_str(), windows.join(", ")).unwrap();
        let line = |vals: &[&str]| {
            vals.iter()
                .enumerate()
                .map(|(j, v)| if j == 0 { format!("{v:<w$}", w = widths[j]) } else { format!("{v:>w$}", w = widths[j]) })
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(&HEAD)).unwrap();
        writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ")).unwrap();
        for c in &cells {
            let refs: Vec<&str> = c.iter().map(String::as_str).collect();
            writeln!(out, "{}", line(&refs)).unwrap();
        }
        out.push('\n');
    }
    out
}
