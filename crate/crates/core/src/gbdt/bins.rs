//! Quantile binning of feature columns.

use crate::matrix::FeatureMatrix;

use super::GbdtError;

/// Per-feature bin boundaries. A present value `x` falls in bin
/// `#{b : b < x}`; a missing value falls in the extra bin after the last
/// finite one.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    pub boundaries: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn n_features(&self) -> usize {
        self.boundaries.len()
    }

    /// Number of finite bins of feature `k`.
    pub fn n_finite(&self, k: usize) -> usize {
        self.boundaries[k].len() + 1
    }

    /// Index of the missing-value bin of feature `k`.
    pub fn missing_bin(&self, k: usize) -> usize {
        self.n_finite(k)
    }

    pub fn bin(&self, k: usize, value: Option<f64>) -> usize {
        match value {
            Some(x) if x.is_finite() => self.boundaries[k].partition_point(|&b| b < x),
            _ => self.missing_bin(k),
        }
    }

    /// Largest value that lands in bin `b` or below; infinite for the last finite bin.
    pub fn upper_value(&self, k: usize, b: usize) -> f64 {
        self.boundaries[k].get(b).copied().unwrap_or(f64::INFINITY)
    }

    pub fn transform(&self, x: &FeatureMatrix) -> BinnedMatrix {
        let n = x.rows;
        let f = self.n_features();
        assert_eq!(x.cols(), f, "matrix width differs from the bin mapper");
        let mut bins = vec![0u16; n * f];
        for k in 0..f {
            for i in 0..n {
                bins[k * n + i] = self.bin(k, x.get(i, k)) as u16;
            }
        }
        BinnedMatrix {
            rows: n,
            n_bins: (0..f).map(|k| self.n_finite(k) + 1).collect(),
            bins,
        }
    }
}

/// Column-major bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    pub rows: usize,
    /// Bins per feature including the missing bin.
    pub n_bins: Vec<usize>,
    pub bins: Vec<u16>,
}

impl BinnedMatrix {
    pub fn n_features(&self) -> usize {
        self.n_bins.len()
    }

    pub fn column(&self, k: usize) -> &[u16] {
        &self.bins[k * self.rows..(k + 1) * self.rows]
    }
}

/// Boundaries at midpoints between distinct values when there are at most
/// `max_bins` of them, otherwise at empirical quantiles.
pub fn fit_bins(x: &FeatureMatrix, max_bins: usize) -> Result<BinMapper, GbdtError> {
    if x.rows == 0 {
        return Err(GbdtError::EmptyMatrix);
    }
    if !(2..=u16::MAX as usize - 1).contains(&max_bins) {
        return Err(GbdtError::InvalidConfig(format!(
            "max_bins must lie in 2..={}",
            u16::MAX - 1
        )));
    }
    let boundaries = (0..x.cols())
        .map(|k| {
            let mut vals: Vec<f64> = (0..x.rows).filter_map(|i| x.get(i, k)).collect();
            vals.sort_by(f64::total_cmp);
            feature_boundaries(&vals, max_bins)
        })
        .collect();
    Ok(BinMapper { boundaries })
}

fn feature_boundaries(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|p| p[0] + (p[1] - p[0]) / 2.0).collect();
    }
    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let idx = q * n / max_bins;
        let (lo, hi) = (sorted[idx - 1], sorted[idx]);
        if lo == hi {
            // cut just after the repeated value, at the next distinct one
            let next = sorted[idx..].iter().copied().find(|&v| v > lo);
            match next {
                Some(v) => push_increasing(&mut out, lo + (v - lo) / 2.0),
                None => continue,
            }
        } else {
            push_increasing(&mut out, lo + (hi - lo) / 2.0);
        }
    }
    out
}

fn push_increasing(out: &mut Vec<f64>, b: f64) {
    if out.last().is_none_or(|&last| b > last) {
        out.push(b);
    }
}
