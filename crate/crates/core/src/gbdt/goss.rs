//! Gradient-based one-side sampling.

use rand::seq::index::sample;
use rand::Rng;

use super::GbdtError;

#[derive(Debug, Clone, PartialEq)]
pub struct GossSample {
    /// Selected rows, ascending.
    pub indices: Vec<usize>,
    /// Weight per row of the full data set; 0 for rows left out.
    pub amplification: Vec<f64>,
}

/// Keep the `⌈aN⌉` rows with the largest gradient norm and `⌈bN⌉` uniformly
/// drawn others, the latter weighted by `(1 − a) / b`.
pub fn goss_select<R: Rng>(g_norms: &[f64], a: f64, b: f64, rng: &mut R) -> Result<GossSample, GbdtError> {
    if !(a > 0.0 && a <= 1.0 && b >= 0.0 && a + b <= 1.0 + 1e-12) {
        return Err(GbdtError::InvalidFractions { a, b });
    }
    let n = g_norms.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| g_norms[j].total_cmp(&g_norms[i]).then(i.cmp(&j)));
    let n_top = ((a * n as f64).ceil() as usize).min(n);
    let rest = &order[n_top..];
    let n_rand = ((b * n as f64).ceil() as usize).min(rest.len());

    let mut amplification = vec![0.0; n];
    for &i in &order[..n_top] {
        amplification[i] = 1.0;
    }
    if n_rand > 0 {
        let factor = (1.0 - a) / b;
        for j in sample(rng, rest.len(), n_rand).into_iter() {
            amplification[rest[j]] = factor;
        }
    }
    let indices = (0..n).filter(|&i| amplification[i] > 0.0).collect();
    Ok(GossSample {
        indices,
        amplification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn keeps_everything_at_a_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = goss_select(&[0.3, 0.1, 0.5], 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2]);
        assert_eq!(s.amplification, vec![1.0; 3]);
    }

    #[test]
    fn ten_rows() {
        let g: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = goss_select(&g, 0.2, 0.1, &mut rng).unwrap();
        assert_eq!(s.indices.len(), 3);
        assert_eq!(s.amplification[9], 1.0);
        assert_eq!(s.amplification[8], 1.0);
        let sampled: Vec<f64> = s.amplification[..8].iter().copied().filter(|&w| w > 0.0).collect();
        assert_eq!(sampled.len(), 1);
        assert!((sampled[0] - 8.0).abs() < 1e-12);

        let s = goss_select(&g, 0.2, 0.0, &mut rng).unwrap();
        assert_eq!(s.indices, vec![8, 9]);
    }

    #[test]
    fn invalid_fractions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(goss_select(&[1.0], 0.8, 0.5, &mut rng).is_err());
        assert!(goss_select(&[1.0], 0.0, 0.5, &mut rng).is_err());
    }
}
