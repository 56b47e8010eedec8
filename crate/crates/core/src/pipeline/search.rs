//! Seeded random hyperparameter search over tree-ensemble settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::gbdt::GbdtConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamRange {
    Fixed(f64),
    /// Continuous, inclusive bounds.
    Uniform(f64, f64),
    /// Integers, inclusive bounds.
    IntUniform(i64, i64),
    Choice(Vec<f64>),
}

impl ParamRange {
    fn is_empty(&self) -> bool {
        match self {
            ParamRange::Fixed(_) => false,
            ParamRange::Uniform(lo, hi) => !(lo <= hi),
            ParamRange::IntUniform(lo, hi) => lo > hi,
            ParamRange::Choice(v) => v.is_empty(),
        }
    }

    /// All values of a finite range.
    fn values(&self) -> Option<Vec<f64>> {
        match self {
            ParamRange::Fixed(v) => Some(vec![*v]),
            ParamRange::Uniform(lo, hi) if lo == hi => Some(vec![*lo]),
            ParamRange::Uniform(..) => None,
            ParamRange::IntUniform(lo, hi) => Some((*lo..=*hi).map(|v| v as f64).collect()),
            ParamRange::Choice(v) => Some(v.clone()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ParamRange::Fixed(v) => *v,
            ParamRange::Uniform(lo, hi) => rng.gen_range(*lo..=*hi),
            ParamRange::IntUniform(lo, hi) => rng.gen_range(*lo..=*hi) as f64,
            ParamRange::Choice(v) => v[rng.gen_range(0..v.len())],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub learning_rate: ParamRange,
    pub max_leaves: ParamRange,
    pub min_samples_leaf: ParamRange,
    pub lambda: ParamRange,
    pub n_rounds: ParamRange,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: ParamRange::Uniform(0.03, 0.3),
            max_leaves: ParamRange::IntUniform(7, 63),
            min_samples_leaf: ParamRange::IntUniform(5, 50),
            lambda: ParamRange::Uniform(0.0, 5.0),
            n_rounds: ParamRange::IntUniform(20, 150),
        }
    }
}

impl SearchSpace {
    fn ranges(&self) -> [&ParamRange; 5] {
        [
            &self.learning_rate,
            &self.max_leaves,
            &self.min_samples_leaf,
            &self.lambda,
            &self.n_rounds,
        ]
    }

    fn apply(base: &GbdtConfig, v: [f64; 5]) -> GbdtConfig {
        GbdtConfig {
            learning_rate: v[0],
            max_leaves: v[1].round().max(1.0) as usize,
            min_samples_leaf: v[2].round().max(1.0) as usize,
            lambda: v[3],
            n_rounds: v[4].round().max(0.0) as usize,
            ..base.clone()
        }
    }

    /// The configurations a search with this budget evaluates, in order. A
    /// finite space no larger than the budget is enumerated exhaustively;
    /// otherwise `budget` points are drawn uniformly.
    pub fn candidates(&self, base: &GbdtConfig, budget: usize, seed: u64) -> Result<Vec<GbdtConfig>, PipelineError> {
        if budget == 0 || self.ranges().iter().any(|r| r.is_empty()) {
            return Err(PipelineError::EmptySpace);
        }
        let finite: Option<Vec<Vec<f64>>> = self.ranges().iter().map(|r| r.values()).collect();
        if let Some(values) = finite {
            let size = values.iter().try_fold(1usize, |acc, v| acc.checked_mul(v.len()));
            if size.is_some_and(|s| s <= budget) {
                let mut out = Vec::new();
                let mut idx = [0usize; 5];
                loop {
                    let v: [f64; 5] = std::array::from_fn(|j| values[j][idx[j]]);
                    out.push(Self::apply(base, v));
                    let mut j = 5;
                    loop {
                        if j == 0 {
                            return Ok(out);
                        }
                        j -= 1;
                        idx[j] += 1;
                        if idx[j] < values[j].len() {
                            break;
                        }
                        idx[j] = 0;
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..budget)
            .map(|_| {
                let v: [f64; 5] = std::array::from_fn(|j| self.ranges()[j].sample(&mut rng));
                Self::apply(base, v)
            })
            .collect())
    }
}

/// Score every candidate and return the best with its score; ties keep the
/// earliest candidate.
pub fn hyperparameter_search<F>(
    space: &SearchSpace,
    base: &GbdtConfig,
    budget: usize,
    seed: u64,
    mut score: F,
) -> Result<(GbdtConfig, f64), PipelineError>
where
    F: FnMut(&GbdtConfig) -> Result<f64, PipelineError>,
{
    let mut best: Option<(GbdtConfig, f64)> = None;
    for c in space.candidates(base, budget, seed)? {
        let s = score(&c)?;
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((c, s));
        }
    }
    best.ok_or(PipelineError::EmptySpace)
}
