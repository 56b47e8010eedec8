//! Class-imbalance handling: SMOTE oversampling, Tomek-link cleaning,
//! inverse-frequency class weights and minority-threshold calibration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::labeling::Label;
use crate::matrix::FeatureMatrix;
use crate::metrics::macro_f1;

#[derive(Debug, Error, PartialEq)]
pub enum ImbalanceError {
    #[error("class {class} has {count} sample(s); at least {needed} required")]
    TooFewSamples {
        class: usize,
        count: usize,
        needed: usize,
    },
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("labels contain a single class")]
    DegenerateInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleConfig {
    /// Target No-LC : Left-LC : Right-LC ratio.
    pub target_ratio: [f64; 3],
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            target_ratio: [27.0, 1.0, 1.0],
            k_neighbors: 5,
            seed: 0,
        }
    }
}

/// One synthetic point and how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteSample {
    /// Row of the base point in the class matrix.
    pub base: usize,
    /// Row of the chosen neighbor.
    pub neighbor: usize,
    pub u: f64,
    pub values: Vec<Option<f64>>,
}

/// Squared distance over the dimensions present in both rows; `scale`
/// divides each dimension. Rows sharing no dimension are infinitely apart.
fn distance2(a: &[Option<f64>], b: &[Option<f64>], scale: &[f64]) -> f64 {
    let mut d = 0.0;
    let mut shared = false;
    for ((x, y), s) in a.iter().zip(b).zip(scale) {
        if let (Some(x), Some(y)) = (x, y) {
            let t = (x - y) / s;
            d += t * t;
            shared = true;
        }
    }
    if shared {
        d
    } else {
        f64::INFINITY
    }
}

/// `base + u·(neighbor − base)` on dimensions present in both; other
/// dimensions keep the base value, so the base's missing pattern is inherited.
pub fn interpolate(base: &[Option<f64>], neighbor: &[Option<f64>], u: f64) -> Vec<Option<f64>> {
    base.iter()
        .zip(neighbor)
        .map(|(b, n)| match (b, n) {
            (Some(b), Some(n)) => Some(b + u * (n - b)),
            (b, _) => *b,
        })
        .collect()
}

/// The `k` nearest other rows of `i`, closest first, ties to the lower index.
fn nearest(x: &FeatureMatrix, i: usize, k: usize, scale: &[f64]) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..x.rows)
        .filter(|&j| j != i)
        .map(|j| (distance2(x.row(i), x.row(j), scale), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

fn smote_scaled(
    samples: &FeatureMatrix,
    n_new: usize,
    k: usize,
    scale: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SmoteSample>, ImbalanceError> {
    if n_new == 0 {
        return Ok(Vec::new());
    }
    if samples.rows < 2 {
        return Err(ImbalanceError::TooFewSamples {
            class: 0,
            count: samples.rows,
            needed: 2,
        });
    }
    if k == 0 {
        return Err(ImbalanceError::InvalidConfig("k_neighbors must be at least 1".into()));
    }
    let k = k.min(samples.rows - 1);
    let mut cache: Vec<Option<Vec<usize>>> = vec![None; samples.rows];
    let mut out = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let base = rng.gen_range(0..samples.rows);
        let nn = cache[base].get_or_insert_with(|| nearest(samples, base, k, scale));
        let neighbor = nn[rng.gen_range(0..nn.len())];
        let u: f64 = rng.gen();
        out.push(SmoteSample {
            base,
            neighbor,
            u,
            values: interpolate(samples.row(base), samples.row(neighbor), u),
        });
    }
    Ok(out)
}

/// `n_new` synthetic points interpolated between random rows of `samples`
/// (one class) and one of their `k` Euclidean nearest neighbors.
pub fn smote(
    samples: &FeatureMatrix,
    n_new: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<SmoteSample>, ImbalanceError> {
    let scale = vec![1.0; samples.cols()];
    smote_scaled(samples, n_new, k, &scale, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn nearest_one(x: &FeatureMatrix, i: usize, scale: &[f64]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for j in 0..x.rows {
        if j == i {
            continue;
        }
        let d = distance2(x.row(i), x.row(j), scale);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.map(|(_, j)| j)
}

fn tomek_scaled(x: &FeatureMatrix, y: &[Label], scale: &[f64]) -> Vec<(usize, usize)> {
    // every link joins two classes, so one endpoint is outside the largest class
    let mut counts = [0usize; 3];
    y.iter().for_each(|l| counts[l.index()] += 1);
    let largest = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    let mut nn: Vec<Option<Option<usize>>> = vec![None; x.rows];
    let mut nn_of = |i: usize| *nn[i].get_or_insert_with(|| nearest_one(x, i, scale));
    let mut links = Vec::new();
    for i in 0..x.rows {
        if y[i].index() == largest {
            continue;
        }
        let Some(j) = nn_of(i) else { continue };
        if y[j] != y[i] && nn_of(j) == Some(i) {
            links.push((i.min(j), i.max(j)));
        }
    }
    links.sort_unstable();
    links.dedup();
    links
}

/// Cross-class pairs of mutual nearest neighbors, as `(lower, higher)` row indices.
pub fn tomek_links(x: &FeatureMatrix, y: &[Label]) -> Vec<(usize, usize)> {
    tomek_scaled(x, y, &vec![1.0; x.cols()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleReport {
    pub before: [usize; 3],
    pub after_smote: [usize; 3],
    pub after_tomek: [usize; 3],
}

impl ResampleReport {
    pub fn summary(&self) -> String {
        let row = |name: &str, c: [usize; 3]| format!("{name:<12}{:>10}{:>10}{:>10}\n", c[0], c[1], c[2]);
        let mut s = format!("{:<12}{:>10}{:>10}{:>10}\n", "stage", "NO-LC", "Left-LC", "Right-LC");
        s += &row("input", self.before);
        s += &row("smote", self.after_smote);
        s += &row("tomek", self.after_tomek);
        s
    }
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: FeatureMatrix,
    pub y: Vec<Label>,
    pub report: ResampleReport,
}

/// Column standard deviations over present values; 1 for flat or empty columns.
fn column_scale(x: &FeatureMatrix) -> Vec<f64> {
    (0..x.cols())
        .map(|j| {
            let vals: Vec<f64> = (0..x.rows).filter_map(|i| x.get(i, j)).collect();
            if vals.len() < 2 {
                return 1.0;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            if v > 1e-24 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

pub fn class_counts(y: &[Label]) -> [usize; 3] {
    let mut c = [0; 3];
    y.iter().for_each(|l| c[l.index()] += 1);
    c
}

/// Sample count each class needs to meet `ratio` relative to the No-LC class.
pub fn smote_targets(counts: [usize; 3], ratio: [f64; 3]) -> [usize; 3] {
    let mut t = counts;
    for c in 1..3 {
        let want = (counts[0] as f64 * ratio[c] / ratio[0]).ceil() as usize;
        t[c] = counts[c].max(want);
    }
    t
}

/// SMOTE every minority class up to the target ratio, then drop both
/// endpoints of every Tomek link. Neighbor searches use columns scaled to unit
/// deviation; synthetic values are interpolated on the original scale.
pub fn resample(x: &FeatureMatrix, y: &[Label], cfg: &ResampleConfig) -> Result<Resampled, ImbalanceError> {
    if cfg.target_ratio.iter().any(|r| !(*r > 0.0)) || cfg.k_neighbors == 0 {
        return Err(ImbalanceError::InvalidConfig(
            "ratios must be positive and k_neighbors at least 1".into(),
        ));
    }
    let before = class_counts(y);
    if let Some(c) = (0..3).find(|&c| before[c] == 0) {
        return Err(ImbalanceError::EmptyClass(c));
    }
    let targets = smote_targets(before, cfg.target_ratio);
    let scale = column_scale(x);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut out_x = x.clone();
    let mut out_y = y.to_vec();
    for c in 1..3 {
        let n_new = targets[c] - before[c];
        if n_new == 0 {
            continue;
        }
        let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i].index() == c).collect();
        let class_x = x.select_rows(&idx);
        let synth = smote_scaled(&class_x, n_new, cfg.k_neighbors, &scale, &mut rng).map_err(|e| match e {
            ImbalanceError::TooFewSamples { count, needed, .. } => ImbalanceError::TooFewSamples {
                class: c,
                count,
                needed,
            },
            e => e,
        })?;
        let label = Label::from_index(c).expect("class index");
        for s in synth {
            out_x.push_row(&s.values).expect("same width");
            out_y.push(label);
        }
    }
    let after_smote = class_counts(&out_y);

    let links = tomek_scaled(&out_x, &out_y, &scale);
    let mut drop = vec![false; out_y.len()];
    for (i, j) in links {
        drop[i] = true;
        drop[j] = true;
    }
    let keep: Vec<usize> = (0..out_y.len()).filter(|&i| !drop[i]).collect();
    let x_kept = out_x.select_rows(&keep);
    let y_kept: Vec<Label> = keep.iter().map(|&i| out_y[i]).collect();
    Ok(Resampled {
        report: ResampleReport {
            before,
            after_smote,
            after_tomek: class_counts(&y_kept),
        },
        x: x_kept,
        y: y_kept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights(pub [f64; 3]);

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights([1.0; 3])
    }

    pub fn of(&self, label: Label) -> f64 {
        self.0[label.index()]
    }
}

/// `w_c = 1 / f_c` with `f_c` the relative frequency of class `c`.
pub fn inverse_frequency_weights(counts: [usize; 3]) -> Result<ClassWeights, ImbalanceError> {
    if let Some(c) = (0..3).find(|&c| counts[c] == 0) {
        return Err(ImbalanceError::EmptyClass(c));
    }
    let total: usize = counts.iter().sum();
    let mut w = [0.0; 3];
    for c in 0..3 {
        let f = counts[c] as f64 / total as f64;
        w[c] = 1.0 / f;
    }
    Ok(ClassWeights(w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    pub left: f64,
    pub right: f64,
}

impl Default for ThresholdSet {
    fn default() -> Self {
        ThresholdSet {
            left: 0.5,
            right: 0.5,
        }
    }
}

/// Stand-in thresholds that only fire when the class already has the largest probability.
pub const ARGMAX_EQUIVALENT: f64 = 1.0 - 1e-9;

pub fn argmax(p: &[f64; 3]) -> Label {
    let mut best = 0;
    for c in 1..3 {
        if p[c] > p[best] {
            best = c;
        }
    }
    Label::from_index(best).expect("class index")
}

/// Minority class with the larger `p / τ` once either reaches its threshold
/// (ties go to Left-LC), otherwise the argmax.
pub fn apply_thresholds(p: &[f64; 3], taus: &ThresholdSet) -> Label {
    if p[1] >= taus.left || p[2] >= taus.right {
        if p[1] / taus.left >= p[2] / taus.right {
            Label::LeftLC
        } else {
            Label::RightLC
        }
    } else {
        argmax(p)
    }
}

pub fn threshold_grid() -> Vec<f64> {
    (1..=25).map(|i| i as f64 * 0.02).collect()
}

/// Exhaustive grid search of minority thresholds maximizing macro-F1; among
/// equal scores the smallest `(τ_L, τ_R)` wins.
pub fn calibrate_thresholds(probs: &[[f64; 3]], labels: &[Label]) -> Result<ThresholdSet, ImbalanceError> {
    if probs.len() != labels.len() {
        return Err(ImbalanceError::InvalidConfig(format!(
            "{} probability rows for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let counts = class_counts(labels);
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ImbalanceError::DegenerateInput);
    }
    let score = |taus: &ThresholdSet| {
        let pred: Vec<Label> = probs.iter().map(|p| apply_thresholds(p, taus)).collect();
        macro_f1(&pred, labels)
    };
    let grid = threshold_grid();
    let mut best = (f64::NEG_INFINITY, ThresholdSet::default());
    for &left in &grid {
        for &right in &grid {
            let taus = ThresholdSet { left, right };
            let s = score(&taus);
            if s > best.0 {
                best = (s, taus);
            }
        }
    }
    let plain: Vec<Label> = probs.iter().map(argmax).collect();
    if best.0 < macro_f1(&plain, labels) {
        return Ok(ThresholdSet {
            left: ARGMAX_EQUIVALENT,
            right: ARGMAX_EQUIVALENT,
        });
    }
    Ok(best.1)
}
