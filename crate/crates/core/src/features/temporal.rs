//! Scalar time-series descriptors.

use rustfft::{num_complex::Complex, FftPlanner};

use super::FeatureWriter;

pub const LAGS_S: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const EMA_HALF_LIFE_S: f64 = 0.5;
pub const SPECTRAL_CUTOFF_HZ: f64 = 1.0;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `x[last] - x[last - lag]`, if the series is long enough.
pub fn lagged_diff(x: &[f64], lag: usize) -> Option<f64> {
    (lag >= 1 && lag < x.len()).then(|| x[x.len() - 1] - x[x.len() - 1 - lag])
}

/// Exponential moving average with the given half-life in frames.
pub fn ema(x: &[f64], half_life_frames: f64) -> Vec<f64> {
    let alpha = 1.0 - 0.5f64.powf(1.0 / half_life_frames.max(1e-9));
    let mut out = Vec::with_capacity(x.len());
    let mut e = x[0];
    for &v in x {
        e += alpha * (v - e);
        out.push(e);
    }
    out
}

/// Mean autocorrelation over lags `1..=max_lag`.
pub fn mean_autocorrelation(x: &[f64], max_lag: usize) -> Option<f64> {
    if max_lag == 0 || x.len() <= max_lag {
        return None;
    }
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if denom <= 1e-12 {
        return None;
    }
    let total: f64 = (1..=max_lag)
        .map(|k| {
            (0..x.len() - k)
                .map(|t| (x[t] - m) * (x[t + k] - m))
                .sum::<f64>()
                / denom
        })
        .sum();
    Some(total / max_lag as f64)
}

/// Share of the mean-removed signal energy at frequencies above `cutoff_hz`.
pub fn spectral_ratio(x: &[f64], fs: f64, cutoff_hz: f64) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut high, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().skip(1) {
        let e = c.norm_sqr();
        let freq = k.min(n - k) as f64 * fs / n as f64;
        total += e;
        if freq > cutoff_hz {
            high += e;
        }
    }
    (total > 1e-18).then(|| high / total)
}

/// Sign changes of the mean-removed series per step.
pub fn zero_crossing_rate(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x);
    let crossings = x
        .windows(2)
        .filter(|p| (p[0] - m) * (p[1] - m) < 0.0)
        .count();
    Some(crossings as f64 / (x.len() - 1) as f64)
}

/// R² of a least-squares line against the frame index; 0 for a constant series.
pub fn linear_r2(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let tm = (n - 1) as f64 / 2.0;
    let m = mean(x);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - tm;
        sxy += dt * (v - m);
        sxx += dt * dt;
        syy += (v - m) * (v - m);
    }
    if syy <= 1e-12 * (1.0 + m * m) * n as f64 {
        return Some(0.0);
    }
    Some((sxy * sxy / (sxx * syy)).clamp(0.0, 1.0))
}

/// Longest run of steps whose first difference keeps the same strict sign, in steps.
pub fn longest_sign_run(x: &[f64]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = 0.0f64;
    for p in x.windows(2) {
        let s = (p[1] - p[0]).signum() * f64::from(p[1] != p[0]);
        if s != 0.0 && s == prev {
            run += 1;
        } else if s != 0.0 {
            run = 1;
        } else {
            run = 0;
        }
        prev = s;
        best = best.max(run);
    }
    best
}

/// Maximal runs of frames with a present value below `threshold`: (count, total frames).
pub fn episodes_below(x: &[Option<f64>], threshold: f64) -> (usize, usize) {
    let mut count = 0;
    let mut frames = 0;
    let mut inside = false;
    for v in x {
        let hit = v.is_some_and(|v| v < threshold);
        if hit {
            frames += 1;
            if !inside {
                count += 1;
            }
        }
        inside = hit;
    }
    (count, frames)
}

/// The eleven descriptors of one series, written as `<prefix>_<descriptor>`.
pub fn write_descriptors(w: &mut FeatureWriter, prefix: &str, x: &[f64], fs: f64) {
    for lag_s in LAGS_S {
        let lag = (lag_s * fs).round() as usize;
        w.put(format_args!("{prefix}_diff_{lag_s:.1}s"), lagged_diff(x, lag));
    }
    let e = ema(x, EMA_HALF_LIFE_S * fs);
    w.put(format_args!("{prefix}_ema"), e.last().copied());
    let slope = (e.len() >= 2).then(|| (e[e.len() - 1] - e[e.len() - 2]) * fs);
    w.put(format_args!("{prefix}_ema_slope"), slope);
    let max_lag = ((0.25 * fs).round() as usize).max(1);
    w.put(format_args!("{prefix}_autocorr"), mean_autocorrelation(x, max_lag));
    w.put(
        format_args!("{prefix}_spectral_ratio"),
        spectral_ratio(x, fs, SPECTRAL_CUTOFF_HZ),
    );
    w.put(format_args!("{prefix}_zcr"), zero_crossing_rate(x));
    w.put(format_args!("{prefix}_r2"), linear_r2(x));
    w.put(
        format_args!("{prefix}_longest_run"),
        Some(longest_sign_run(x) as f64 / fs),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_ratio(x: &[f64], fs: f64, cutoff: f64) -> f64 {
        let n = x.len();
        let m = mean(x);
        let (mut hi, mut tot) = (0.0, 0.0);
        for k in 1..n {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                re += (v - m) * a.cos();
                im += (v - m) * a.sin();
            }
            let e = re * re + im * im;
            tot += e;
            if k.min(n - k) as f64 * fs / n as f64 > cutoff {
                hi += e;
            }
        }
        hi / tot
    }

    #[test]
    fn constant_series() {
        let x = vec![3.0; 60];
        for lag in [12, 25, 38, 50] {
            assert_eq!(lagged_diff(&x, lag), Some(0.0));
        }
        assert_eq!(linear_r2(&x), Some(0.0));
        assert_eq!(zero_crossing_rate(&x), Some(0.0));
        assert_eq!(spectral_ratio(&x, 25.0, 1.0), None);
        assert_eq!(longest_sign_run(&x), 0);
    }

    #[test]
    fn line_series() {
        let fs = 25.0;
        let x: Vec<f64> = (0..200).map(|i| 0.7 * i as f64 / fs + 2.0).collect();
        assert!((linear_r2(&x).unwrap() - 1.0).abs() < 1e-12);
        let e = ema(&x, 0.5 * fs);
        let slope = (e[e.len() - 1] - e[e.len() - 2]) * fs;
        assert!((slope - 0.7).abs() < 1e-4);
        assert_eq!(longest_sign_run(&x), 199);
    }

    #[test]
    fn two_hertz_sinusoid_is_high_frequency() {
        let fs = 25.0;
        let x: Vec<f64> = (0..50).map(|i| (2.0 * PI * 2.0 * i as f64 / fs).sin()).collect();
        let r = spectral_ratio(&x, fs, 1.0).unwrap();
        assert!(r > 0.99);
        assert!((r - naive_ratio(&x, fs, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn fft_matches_naive_transform_on_noise() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let r = spectral_ratio(&x, 25.0, 1.0).unwrap();
        assert!((r - naive_ratio(&x, 25.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn ttc_episodes() {
        let x = [Some(6.0), Some(2.0), Some(2.5), None, Some(4.0), Some(1.0), Some(9.0)];
        assert_eq!(episodes_below(&x, 3.0), (2, 3));
        assert_eq!(episodes_below(&x, 5.0), (2, 4));
    }

    #[test]
    fn autocorrelation_of_slow_wave_is_high() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.05).sin()).collect();
        assert!(mean_autocorrelation(&x, 6).unwrap() > 0.8);
    }
}
