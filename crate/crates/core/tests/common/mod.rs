//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

use lane_intent::bilstm::{BiLstmEncoder, Pooling};
use lane_intent::gbdt::{best_split, build_histogram, softmax_objective, BinnedMatrix, GbdtConfig, Split};
use lane_intent::labeling::{Label, Sequence};
use lane_intent::matrix::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gain_by_hand(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

pub struct Instance {
    binned: BinnedMatrix,
    g: Vec<f64>,
    h: Vec<f64>,
    weights: Option<Vec<f64>>,
    cfg: GbdtConfig,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let rows = rng.gen_range(2..=200);
    let features = rng.gen_range(1..=3);
    // finite bins plus the trailing missing bin, at most 8 in all
    let n_bins: Vec<usize> = (0..features).map(|_| rng.gen_range(2..=8)).collect();
    let mut bins = Vec::with_capacity(rows * features);
    for &nb in &n_bins {
        let missing_rate = if rng.gen_bool(0.5) { 0.0 } else { 0.2 };
        for _ in 0..rows {
            let b = if rng.gen_bool(missing_rate) { nb - 1 } else { rng.gen_range(0..nb - 1) };
            bins.push(b as u16);
        }
    }
    let g = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let h = (0..rows).map(|_| rng.gen_range(0.01..0.25)).collect();
    let weights = rng.gen_bool(0.5).then(|| (0..rows).map(|_| rng.gen_range(0.5..3.0)).collect());
    let cfg = GbdtConfig {
        min_samples_leaf: rng.gen_range(1..=10),
        lambda: rng.gen_range(0.0..2.0),
        gamma: if rng.gen_bool(0.3) { rng.gen_range(0.0..0.1) } else { 0.0 },
        ..GbdtConfig::default()
    };
    Instance {
        binned: BinnedMatrix { rows, n_bins, bins },
        g,
        h,
        weights,
        cfg,
    }
}

/// Enumerate every (feature, threshold, missing direction) by partitioning
/// the samples themselves.
pub fn exhaustive_split(inst: &Instance) -> Option<Split> {
    let b = &inst.binned;
    let w = |i: usize| inst.weights.as_ref().map_or(1.0, |w| w[i]);
    let min_leaf = inst.cfg.min_samples_leaf.max(1);
    let mut best: Option<Split> = None;
    for k in 0..b.n_features() {
        let miss = b.n_bins[k] - 1;
        let col = b.column(k);
        for t in 0..miss {
            for missing_left in [false, true] {
                let (mut gl, mut hl, mut nl, mut gr, mut hr, mut nr) = (0.0, 0.0, 0, 0.0, 0.0, 0);
                for i in 0..b.rows {
                    let bin = col[i] as usize;
                    let left = if bin == miss { missing_left } else { bin <= t };
                    if left {
                        gl += w(i) * inst.g[i];
                        hl += w(i) * inst.h[i];
                        nl += 1;
                    } else {
                        gr += w(i) * inst.g[i];
                        hr += w(i) * inst.h[i];
                        nr += 1;
                    }
                }
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let gain = gain_by_hand(gl, hl, gr, hr, inst.cfg.lambda, inst.cfg.gamma);
                if gain > 0.0 && best.is_none_or(|s| gain > s.gain + 1e-12) {
                    best = Some(Split {
                        feature: k,
                        bin: t,
                        missing_left,
                        gain,
                    });
                }
            }
        }
    }
    best
}

/// Compare `best_split` with exhaustive enumeration on `cases` random
/// instances; returns how many instances had a split.
pub fn check_split_oracle(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = 0;
    for case in 0..cases {
        let inst = random_instance(&mut rng);
        let all: Vec<usize> = (0..inst.binned.rows).collect();
        let hists: Vec<_> = (0..inst.binned.n_features())
            .map(|k| build_histogram(&all, &inst.binned, k, &inst.g, &inst.h, inst.weights.as_deref()))
            .collect();
        match (best_split(&hists, &inst.cfg), exhaustive_split(&inst)) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                found += 1;
                if (a.feature, a.bin, a.missing_left) != (b.feature, b.bin, b.missing_left)
                    || (a.gain - b.gain).abs() > 1e-9
                {
                    return Err(format!("case {case}: {a:?} vs {b:?}"));
                }
            }
            (a, b) => return Err(format!("case {case}: {a:?} vs {b:?}")),
        }
    }
    Ok(found)
}

pub fn sample_loss(z: &[f64], y: usize, w: f64) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    w * (lse - z[y])
}

/// Worst relative error of the softmax gradient and diagonal hessian against
/// central differences over `instances` random 5x3 problems.
pub fn softmax_fd_worst(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (5, 3);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-6);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let z: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..5.0)).collect();
        let out = softmax_objective(&z, c, &y, &w);
        let mean: f64 = (0..n).map(|i| sample_loss(&z[i * c..(i + 1) * c], y[i], w[i])).sum::<f64>() / n as f64;
        worst = worst.max((out.loss - mean).abs());
        for i in 0..n {
            for k in 0..c {
                let row = |d: f64| {
                    let mut r = z[i * c..(i + 1) * c].to_vec();
                    r[k] += d;
                    sample_loss(&r, y[i], w[i])
                };
                let e1 = 1e-6;
                let g = (row(e1) - row(-e1)) / (2.0 * e1);
                let e2 = 1e-4;
                let h = (row(e2) - 2.0 * row(0.0) + row(-e2)) / (e2 * e2);
                worst = worst.max(rel(out.grad[i * c + k], g)).max(rel(out.hess[i * c + k], h));
            }
        }
    }
    worst
}

pub fn random_seq(steps: usize, d: usize, rng: &mut ChaCha8Rng) -> Sequence {
    Sequence::new(steps, d, (0..steps * d).map(|_| rng.gen_range(-1.5..1.5)).collect())
}

/// Worst relative error of every BPTT gradient entry against central
/// differences, for d=3, hidden=4, T=5.
pub fn bilstm_fd_worst(pooling: Pooling, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = BiLstmEncoder::init(3, 4, pooling, &mut rng);
    let seqs: Vec<Sequence> = (0..3).map(|_| random_seq(5, 3, &mut rng)).collect();
    let batch: Vec<(&Sequence, usize)> = seqs.iter().zip([0, 1, 2]).collect();
    let weights = [1.0, 2.5, 0.7];
    let (_, grads) = enc.loss_and_gradient(&batch, &weights).unwrap();

    let eps = 1e-5;
    let mut worst = 0.0f64;
    for ti in 0..14 {
        for k in 0..enc.tensors()[ti].len() {
            let mut plus = enc.clone();
            plus.tensors_mut()[ti][k] += eps;
            let mut minus = enc.clone();
            minus.tensors_mut()[ti][k] -= eps;
            let lp = plus.loss_and_gradient(&batch, &weights).unwrap().0;
            let lm = minus.loss_and_gradient(&batch, &weights).unwrap().0;
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = grads.tensors()[ti][k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

pub fn dist2(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x.unwrap() - y.unwrap();
            t * t
        })
        .sum()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, grid: bool) -> FeatureMatrix {
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| {
            if grid {
                f64::from(rng.gen_range(0..6))
            } else {
                rng.gen_range(-5.0..5.0)
            }
        })
        .collect();
    FeatureMatrix::from_dense(cols, &values)
}

pub fn brute_force_tomek(x: &FeatureMatrix, y: &[Label]) -> Vec<(usize, usize)> {
    let nn = |i: usize| {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..x.rows {
            if j != i {
                let d = dist2(x.row(i), x.row(j));
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
        }
        best.map(|b| b.1)
    };
    let mut links = Vec::new();
    for i in 0..x.rows {
        for j in i + 1..x.rows {
            if y[i] != y[j] && nn(i) == Some(j) && nn(j) == Some(i) {
                links.push((i, j));
            }
        }
    }
    links
}
