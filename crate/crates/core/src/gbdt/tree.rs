//! Histograms, split search and leaf-wise tree growth.

use super::bins::{BinMapper, BinnedMatrix};
use super::GbdtConfig;

/// Gradient statistics of one feature's bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub count: Vec<u32>,
}

impl Histogram {
    pub fn zeros(bins: usize) -> Self {
        Histogram {
            grad: vec![0.0; bins],
            hess: vec![0.0; bins],
            count: vec![0; bins],
        }
    }

    pub fn totals(&self) -> (f64, f64, u32) {
        (
            self.grad.iter().sum(),
            self.hess.iter().sum(),
            self.count.iter().sum(),
        )
    }

    /// `self - other`, elementwise.
    pub fn subtract(&self, other: &Histogram) -> Histogram {
        Histogram {
            grad: self.grad.iter().zip(&other.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(a, b)| a - b).collect(),
            count: self.count.iter().zip(&other.count).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Sum `weight · g` and `weight · h` of the indexed samples per bin of feature `k`.
pub fn build_histogram(
    indices: &[usize],
    binned: &BinnedMatrix,
    k: usize,
    g: &[f64],
    h: &[f64],
    weights: Option<&[f64]>,
) -> Histogram {
    let mut hist = Histogram::zeros(binned.n_bins[k]);
    let col = binned.column(k);
    match weights {
        None => {
            for &i in indices {
                let b = col[i] as usize;
                hist.grad[b] += g[i];
                hist.hess[b] += h[i];
                hist.count[b] += 1;
            }
        }
        Some(w) => {
            for &i in indices {
                let b = col[i] as usize;
                hist.grad[b] += w[i] * g[i];
                hist.hess[b] += w[i] * h[i];
                hist.count[b] += 1;
            }
        }
    }
    hist
}

fn build_all(
    indices: &[usize],
    binned: &BinnedMatrix,
    g: &[f64],
    h: &[f64],
    weights: Option<&[f64]>,
) -> Vec<Histogram> {
    (0..binned.n_features())
        .map(|k| build_histogram(indices, binned, k, g, h, weights))
        .collect()
}

/// Regularized gain of splitting a node into left and right children.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let term = |g: f64, h: f64| {
        let d = h + lambda;
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    };
    0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr)) - gamma
}

pub fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Finite bins `0..=bin` go left.
    pub bin: usize,
    pub missing_left: bool,
    pub gain: f64,
}

/// Best split over all features, finite-bin thresholds and both missing
/// directions. Ties keep the first candidate in (feature, bin) order, with
/// missing values sent right before left.
pub fn best_split(hists: &[Histogram], cfg: &GbdtConfig) -> Option<Split> {
    let mut best: Option<Split> = None;
    let min_leaf = cfg.min_samples_leaf as u32;
    for (k, hist) in hists.iter().enumerate() {
        let n_bins = hist.grad.len();
        let miss = n_bins - 1;
        let (gt, ht, ct) = hist.totals();
        let (gm, hm, cm) = (hist.grad[miss], hist.hess[miss], hist.count[miss]);
        let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0u32);
        for b in 0..miss {
            gl += hist.grad[b];
            hl += hist.hess[b];
            cl += hist.count[b];
            for missing_left in [false, true] {
                let (g_left, h_left, c_left) = if missing_left {
                    (gl + gm, hl + hm, cl + cm)
                } else {
                    (gl, hl, cl)
                };
                let c_right = ct - c_left;
                if c_left < min_leaf.max(1) || c_right < min_leaf.max(1) {
                    continue;
                }
                let gain = split_gain(
                    g_left,
                    h_left,
                    gt - g_left,
                    ht - h_left,
                    cfg.lambda,
                    cfg.gamma,
                );
                if gain > 0.0 && best.is_none_or(|s| gain > s.gain) {
                    best = Some(Split {
                        feature: k,
                        bin: b,
                        missing_left,
                        gain,
                    });
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        bin: usize,
        /// Present values `<= threshold` go left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Gains of the applied splits, in growth order.
    pub gains: Vec<f64>,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict(&self, row: &[Option<f64>]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match row[*feature] {
                        Some(x) if x.is_finite() => x <= *threshold,
                        _ => *missing_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Prediction from precomputed bins (row `i` of `binned`).
    pub fn predict_binned(&self, binned: &BinnedMatrix, i: usize) -> f64 {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    bin,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let b = binned.column(*feature)[i] as usize;
                    let go_left = if b == binned.n_bins[*feature] - 1 {
                        *missing_left
                    } else {
                        b <= *bin
                    };
                    n = if go_left { *left } else { *right };
                }
            }
        }
    }
}

struct Frontier {
    node: usize,
    indices: Vec<usize>,
    depth: usize,
    hists: Vec<Histogram>,
    split: Option<Split>,
}

fn node_totals(hists: &[Histogram]) -> (f64, f64) {
    let (g, h, _) = hists[0].totals();
    (g, h)
}

/// Grow one tree leaf-wise: always split the frontier leaf with the largest gain.
pub fn grow_tree(
    indices: &[usize],
    g: &[f64],
    h: &[f64],
    weights: Option<&[f64]>,
    binned: &BinnedMatrix,
    mapper: &BinMapper,
    cfg: &GbdtConfig,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut gains = Vec::new();
    let splittable = |depth: usize| depth < cfg.max_depth && cfg.max_leaves > 1;
    let root_hists = build_all(indices, binned, g, h, weights);
    let root_split = if splittable(0) { best_split(&root_hists, cfg) } else { None };
    let mut frontier = vec![Frontier {
        node: 0,
        indices: indices.to_vec(),
        depth: 0,
        hists: root_hists,
        split: root_split,
    }];
    let mut leaves = 1;

    while leaves < cfg.max_leaves {
        let pick = frontier
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.split.map(|s| (i, s.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, gain)| match acc {
                Some((_, best)) if best >= gain => acc,
                _ => Some((i, gain)),
            });
        let Some((fi, _)) = pick else { break };
        let leaf = frontier.swap_remove(fi);
        let split = leaf.split.expect("picked leaf has a split");
        let col = binned.column(split.feature);
        let miss = binned.n_bins[split.feature] - 1;
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = leaf.indices.iter().partition(|&&i| {
            let b = col[i] as usize;
            if b == miss {
                split.missing_left
            } else {
                b <= split.bin
            }
        });
        let (small, small_is_left) = if left_idx.len() <= right_idx.len() {
            (&left_idx, true)
        } else {
            (&right_idx, false)
        };
        let small_hists = build_all(small, binned, g, h, weights);
        let large_hists: Vec<Histogram> = leaf
            .hists
            .iter()
            .zip(&small_hists)
            .map(|(p, s)| p.subtract(s))
            .collect();
        let (left_hists, right_hists) = if small_is_left {
            (small_hists, large_hists)
        } else {
            (large_hists, small_hists)
        };

        let left_node = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            bin: split.bin,
            threshold: mapper.upper_value(split.feature, split.bin),
            missing_left: split.missing_left,
            left: left_node,
            right: left_node + 1,
        };
        gains.push(split.gain);
        leaves += 1;
        let depth = leaf.depth + 1;
        for (node, idx, hists) in [
            (left_node, left_idx, left_hists),
            (left_node + 1, right_idx, right_hists),
        ] {
            let split = if splittable(depth) { best_split(&hists, cfg) } else { None };
            frontier.push(Frontier {
                node,
                indices: idx,
                depth,
                hists,
                split,
            });
        }
    }

    for f in &frontier {
        let (gs, hs) = node_totals(&f.hists);
        nodes[f.node] = Node::Leaf {
            value: leaf_value(gs, hs, cfg.lambda),
        };
    }
    Tree { nodes, gains }
}
