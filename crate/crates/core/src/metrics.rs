//! Three-class classification metrics.

use thiserror::Error;

use crate::labeling::Label;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no samples to score")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; 3]; 3],
    pub accuracy: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Result<Self, MetricsError> {
        let n: usize = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(MetricsError::Empty);
        }
        let trace: usize = (0..3).map(|c| confusion[c][c]).sum();
        let mut precision = [0.0; 3];
        let mut recall = [0.0; 3];
        let mut f1 = [0.0; 3];
        for c in 0..3 {
            let tp = confusion[c][c];
            let predicted: usize = (0..3).map(|r| confusion[r][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            precision[c] = ratio(tp, predicted);
            recall[c] = ratio(tp, actual);
            let (p, r) = (precision[c], recall[c]);
            f1[c] = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        }
        Ok(MetricsReport {
            confusion,
            accuracy: trace as f64 / n as f64,
            precision,
            recall,
            f1,
            macro_f1: f1.iter().sum::<f64>() / 3.0,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn confusion_matrix(predictions: &[Label], labels: &[Label]) -> [[usize; 3]; 3] {
    let mut m = [[0usize; 3]; 3];
    for (p, t) in predictions.iter().zip(labels) {
        m[t.index()][p.index()] += 1;
    }
    m
}

pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<MetricsReport, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    MetricsReport::from_confusion(confusion_matrix(predictions, labels))
}

/// Macro-F1 without building a report; 0 for empty input.
pub fn macro_f1(predictions: &[Label], labels: &[Label]) -> f64 {
    compute_metrics(predictions, labels).map_or(0.0, |r| r.macro_f1)
}
