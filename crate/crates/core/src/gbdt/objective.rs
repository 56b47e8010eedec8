//! Weighted softmax cross-entropy.

/// Row-wise softmax of an `n × c` row-major logit matrix.
pub fn softmax(logits: &[f64], c: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(logits.len());
    for row in logits.chunks(c) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        p.extend(e.iter().map(|v| v / s));
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveOutput {
    /// `-(1/n) Σ_i w_i log p_{i, y_i}`.
    pub loss: f64,
    /// `w_i (p_ic - y_ic)`, row-major.
    pub grad: Vec<f64>,
    /// `w_i p_ic (1 - p_ic)`, row-major.
    pub hess: Vec<f64>,
}

pub fn softmax_objective(logits: &[f64], c: usize, labels: &[usize], weights: &[f64]) -> ObjectiveOutput {
    let n = labels.len();
    assert_eq!(logits.len(), n * c, "logit matrix shape");
    assert_eq!(weights.len(), n, "one weight per sample");
    let p = softmax(logits, c);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n * c);
    let mut hess = Vec::with_capacity(n * c);
    for i in 0..n {
        let w = weights[i];
        for k in 0..c {
            let pk = p[i * c + k];
            let y = f64::from(u8::from(labels[i] == k));
            grad.push(w * (pk - y));
            hess.push(w * pk * (1.0 - pk));
        }
        loss -= w * p[i * c + labels[i]].max(f64::MIN_POSITIVE).ln();
    }
    ObjectiveOutput {
        loss: if n == 0 { 0.0 } else { loss / n as f64 },
        grad,
        hess,
    }
}
