//! Measures how well the subsampled Mahalanobis term and density estimate a point's
//! dense counterparts, as a function of the sampling fraction Q/P.
//!
//! The protocol holds one instance fixed — a point x, a mean mu, and a diagonal
//! covariance S, all drawn once from the experiment seed — and resamples only the
//! index set across trials. For each trial the sum of (x_q - mu_q)^2 / s_q over a
//! uniformly drawn Q-subset, scaled by P/Q, is an exactly unbiased estimator of the
//! dense sum, so its trial mean must land within Monte Carlo error of the dense value.
//! The density itself is a nonlinear function of that sum and picks up a spread that
//! shrinks as Q grows; the relative errors reported here trace that decay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gmm::LN_2PI;

/// Experiment shape: ambient dimension, sampling fractions to probe, trials per
/// fraction, and the seed that fixes the instance and the index-set stream.
#[derive(Debug, Clone)]
pub struct BiasConfig {
    pub p: usize,
    pub q_over_p: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig { p: 100, q_over_p: vec![0.05, 0.1, 0.2, 0.5], trials: 10_000, seed: 0 }
    }
}

/// Aggregates for one sampling fraction.
#[derive(Debug, Clone)]
pub struct BiasPoint {
    pub q_over_p: f64,
    pub q: usize,
    /// Mean and standard error of |scaled subsampled quadratic - dense| / dense.
    pub mean_rel_err_d: f64,
    pub stderr_d: f64,
    /// Mean and standard error of the density's relative error in linear space.
    pub mean_rel_err_p: f64,
    pub stderr_p: f64,
    /// Trial mean and standard error of the scaled quadratic itself, for the
    /// unbiasedness check against `dense_d`.
    pub mean_scaled_d: f64,
    pub stderr_scaled_d: f64,
    pub dense_d: f64,
    pub median_rel_err_d: f64,
    pub median_rel_err_p: f64,
}

/// Run the experiment. Deterministic in `config.seed`: the instance comes from the
/// seed's default stream and trial t's index set from stream t + 1, so per-fraction
/// results depend only on (seed, fraction, trial count).
pub fn bias_experiment(config: &BiasConfig) -> Result<Vec<BiasPoint>> {
    if config.p == 0 || config.trials == 0 {
        return Err(Error::invalid("bias experiment needs p >= 1 and trials >= 1"));
    }
    for &f in &config.q_over_p {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid(format!("sampling fraction {f} outside (0, 1]")));
        }
    }
    let p = config.p;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mu: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let s: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();

    // Dense references, accumulated in index order — the same order the Q = P
    // subsample uses, so that fraction reproduces them bit for bit.
    let dense_d: f64 = (0..p).map(|j| (x[j] - mu[j]).powi(2) / s[j]).sum();
    let dense_logdet: f64 = s.iter().map(|v| v.ln()).sum();
    let dense_logp = -0.5 * (p as f64 * LN_2PI + dense_logdet + dense_d);

    let mut points = Vec::with_capacity(config.q_over_p.len());
    for &fraction in &config.q_over_p {
        let q = ((fraction * p as f64).round() as usize).clamp(1, p);
        let scale = p as f64 / q as f64;
        let mut rel_d = Vec::with_capacity(config.trials);
        let mut rel_p = Vec::with_capacity(config.trials);
        let mut scaled = Vec::with_capacity(config.trials);
        for t in 0..config.trials {
            let mut trial_rng = ChaCha8Rng::seed_from_u64(config.seed);
            trial_rng.set_stream(t as u64 + 1);
            let idx = sorted_subset(&mut trial_rng, p, q);
            let mut d_r = 0.0;
            let mut logdet = 0.0;
            for &j in &idx {
                let j = j as usize;
                d_r += (x[j] - mu[j]).powi(2) / s[j];
                logdet += s[j].ln();
            }
            let scaled_d = scale * d_r;
            let scaled_logp = -0.5 * (p as f64 * LN_2PI + scale * logdet + scaled_d);
            scaled.push(scaled_d);
            rel_d.push((scaled_d - dense_d).abs() / dense_d);
            rel_p.push((scaled_logp - dense_logp).exp_m1().abs());
        }
        let (mean_rel_err_d, stderr_d) = mean_stderr(&rel_d);
        let (mean_rel_err_p, stderr_p) = mean_stderr(&rel_p);
        let (mean_scaled_d, stderr_scaled_d) = mean_stderr(&scaled);
        points.push(BiasPoint {
            q_over_p: fraction,
            q,
            mean_rel_err_d,
            stderr_d,
            mean_rel_err_p,
            stderr_p,
            mean_scaled_d,
            stderr_scaled_d,
            dense_d,
            median_rel_err_d: median(&mut rel_d),
            median_rel_err_p: median(&mut rel_p),
        });
    }
    Ok(points)
}

/// Uniformly random size-q subset of 0..p, returned sorted, via a partial
/// Fisher-Yates over a sparse map of displaced entries.
fn sorted_subset(rng: &mut ChaCha8Rng, p: usize, q: usize) -> Vec<u32> {
    let mut displaced: std::collections::HashMap<usize, u32> = std::collections::HashMap::new();
    let mut picked = Vec::with_capacity(q);
    for i in 0..q {
        let j = rng.random_range(i..p);
        let at_j = displaced.get(&j).copied().unwrap_or(j as u32);
        let at_i = displaced.get(&i).copied().unwrap_or(i as u32);
        picked.push(at_j);
        displaced.insert(j, at_i);
    }
    picked.sort_unstable();
    picked
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaNs"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Write one CSV row per sampling fraction with header
/// `q_over_p,mean_rel_err_D,stderr_D,mean_rel_err_p,stderr_p`.
pub fn write_bias_csv<W: std::io::Write>(points: &[BiasPoint], mut writer: W) -> Result<()> {
    writeln!(writer, "q_over_p,mean_rel_err_D,stderr_D,mean_rel_err_p,stderr_p")?;
    for pt in points {
        writeln!(
            writer,
            "{},{},{},{},{}",
            pt.q_over_p, pt.mean_rel_err_d, pt.stderr_d, pt.mean_rel_err_p, pt.stderr_p
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sampling_reproduces_dense_values_exactly() {
        let config = BiasConfig { p: 32, q_over_p: vec![1.0], trials: 50, seed: 7 };
        let pt = &bias_experiment(&config).unwrap()[0];
        assert_eq!(pt.q, 32);
        assert_eq!(pt.mean_rel_err_d, 0.0);
        assert_eq!(pt.mean_rel_err_p, 0.0);
        assert_eq!(pt.stderr_d, 0.0);
        // Every trial reproduces dense_d bitwise; averaging the copies still rounds.
        let ulps = (pt.mean_scaled_d - pt.dense_d).abs() / f64::EPSILON / pt.dense_d;
        assert!(ulps <= 2.0, "mean of identical trials drifted {ulps} ulps");
    }

    #[test]
    fn scaled_quadratic_is_unbiased_within_monte_carlo_error() {
        let config = BiasConfig { p: 64, q_over_p: vec![0.125, 0.5], trials: 4000, seed: 11 };
        for pt in bias_experiment(&config).unwrap() {
            let gap = (pt.mean_scaled_d - pt.dense_d).abs();
            assert!(
                gap <= 3.0 * pt.stderr_scaled_d,
                "Q/P={}: |{} - {}| > 3 x {}",
                pt.q_over_p,
                pt.mean_scaled_d,
                pt.dense_d,
                pt.stderr_scaled_d
            );
        }
    }

    #[test]
    fn median_errors_shrink_as_sampling_grows() {
        let config =
            BiasConfig { p: 80, q_over_p: vec![0.05, 0.2, 0.5, 1.0], trials: 2000, seed: 3 };
        let points = bias_experiment(&config).unwrap();
        for w in points.windows(2) {
            assert!(
                w[1].median_rel_err_d <= w[0].median_rel_err_d + 1e-12,
                "median D error grew from Q/P={} to {}",
                w[0].q_over_p,
                w[1].q_over_p
            );
            assert!(
                w[1].median_rel_err_p <= w[0].median_rel_err_p + 1e-12,
                "median density error grew from Q/P={} to {}",
                w[0].q_over_p,
                w[1].q_over_p
            );
        }
    }

    #[test]
    fn experiment_is_deterministic_in_the_seed() {
        let config = BiasConfig { p: 24, q_over_p: vec![0.25], trials: 200, seed: 5 };
        let a = bias_experiment(&config).unwrap();
        let b = bias_experiment(&config).unwrap();
        assert_eq!(a[0].mean_rel_err_d, b[0].mean_rel_err_d);
        assert_eq!(a[0].mean_rel_err_p, b[0].mean_rel_err_p);
        assert_eq!(a[0].median_rel_err_d, b[0].median_rel_err_d);
    }

    #[test]
    fn subsets_are_uniform_over_indices() {
        // Every index should appear with frequency q/p across many trials.
        let p = 10;
        let q = 3;
        let trials = 30_000;
        let mut counts = vec![0u32; p];
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            rng.set_stream(t + 1);
            let idx = sorted_subset(&mut rng, p, q);
            assert_eq!(idx.len(), q);
            for w in idx.windows(2) {
                assert!(w[0] < w[1], "indices must be strictly increasing");
            }
            for &j in &idx {
                counts[j as usize] += 1;
            }
        }
        let expected = trials as f64 * q as f64 / p as f64;
        let sigma = (trials as f64 * (q as f64 / p as f64) * (1.0 - q as f64 / p as f64)).sqrt();
        for (j, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 4.0 * sigma,
                "index {j} drawn {c} times, expected {expected}"
            );
        }
    }

    #[test]
    fn csv_has_the_documented_header() {
        let config = BiasConfig { p: 16, q_over_p: vec![0.25, 1.0], trials: 10, seed: 0 };
        let points = bias_experiment(&config).unwrap();
        let mut buf = Vec::new();
        write_bias_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "q_over_p,mean_rel_err_D,stderr_D,mean_rel_err_p,stderr_p"
        );
        assert_eq!(lines.count(), 2);
        assert!(text.lines().nth(2).unwrap().starts_with("1,0,0,"));
    }

    #[test]
    fn rejects_bad_fractions() {
        let bad = BiasConfig { p: 8, q_over_p: vec![0.0], trials: 5, seed: 0 };
        assert!(bias_experiment(&bad).is_err());
        let bad = BiasConfig { p: 8, q_over_p: vec![1.5], trials: 5, seed: 0 };
        assert!(bias_experiment(&bad).is_err());
    }
}
