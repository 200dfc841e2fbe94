//! Per-iteration wall times for sketched and dense EM cycles across a sweep of
//! sample sizes Q, on identical data with identical init seeds.
//!
//! One cycle is an M-step followed by an E-step, the same pair the fit loop runs.
//! Each sweep point runs one untimed warmup cycle first (to fault in caches and
//! allocator state), then `iters` timed cycles that become one row each. Everything
//! runs single-threaded so the rows measure arithmetic, not scheduling.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baseline::{
    dense_bootstrap, dense_e_step, dense_kmeanspp, dense_m_step_cov, dense_m_step_means,
};
use crate::error::{Error, Result};
use crate::gmm::{
    e_step, m_step_cov_diagonal, m_step_cov_spherical, m_step_means, m_step_weights,
    CovarianceKind, CovarianceModel, MixtureParams,
};
use crate::init::{bootstrap_responsibilities, kmeanspp_init};
use crate::sketch::{sketch_matrix, SketchSpec};

/// Sweep shape: data size, Q values to probe, timed cycles per point, and whether to
/// also time dense cycles on the same data (reported with Q = P).
#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub q_list: Vec<usize>,
    pub covariance: CovarianceKind,
    pub iters: usize,
    pub seed: u64,
    pub include_dense: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            n: 20_000,
            p: 1024,
            k: 5,
            q_list: vec![8, 16, 32, 64, 128],
            covariance: CovarianceKind::Diagonal,
            iters: 10,
            seed: 0,
            include_dense: false,
        }
    }
}

/// One timed cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: &'static str,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub q: usize,
    pub iter_idx: usize,
    pub seconds: f64,
}

/// Median and interquartile range per (method, Q) group.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingSummary {
    pub method: &'static str,
    pub q: usize,
    pub median_seconds: f64,
    pub iqr_seconds: f64,
}

/// Run the sweep. The data matrix is drawn once from `seed` and shared by every
/// point; k-means++ seeding also reuses `seed`, so the only thing that varies across
/// sweep points is Q.
pub fn timing_benchmark(config: &TimingConfig) -> Result<Vec<TimingRow>> {
    if config.n == 0 || config.p == 0 || config.iters == 0 {
        return Err(Error::invalid("timing sweep needs n, p, iters >= 1"));
    }
    if config.k == 0 || config.k > config.n {
        return Err(Error::invalid("timing sweep needs 1 <= k <= n"));
    }
    if config.q_list.is_empty() {
        return Err(Error::invalid("timing sweep needs at least one Q"));
    }
    for &q in &config.q_list {
        if q == 0 || q > config.p {
            return Err(Error::invalid(format!("Q={q} outside 1..=P={}", config.p)));
        }
    }
    if config.covariance == CovarianceKind::Full {
        return Err(Error::invalid("timing sweep covers diagonal and spherical models"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rows: Vec<Vec<f64>> = (0..config.n)
        .map(|_| (0..config.p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    let mut out = Vec::new();
    for &q in &config.q_list {
        let spec = SketchSpec { p: config.p, q, q_shared: 0, seed: config.seed };
        let ds = sketch_matrix(&rows, &spec)?;
        let means = kmeanspp_init(&ds, config.k, config.seed)?;
        let r0 = bootstrap_responsibilities(&ds, &means);
        let covariance = sketched_cov(&ds, &r0, &means, config);
        let mut params = MixtureParams { weights: m_step_weights(&r0), means, covariance };
        let (mut resp, _) = e_step(&ds, &params)?;

        for cycle in 0..=config.iters {
            let t0 = Instant::now();
            params.weights = m_step_weights(&resp);
            let means = m_step_means(&ds, &resp);
            params.covariance = sketched_cov(&ds, &resp, &means, config);
            params.means = means;
            let (next, _) = e_step(&ds, &params)?;
            let seconds = t0.elapsed().as_secs_f64();
            resp = next;
            if cycle > 0 {
                out.push(TimingRow {
                    method: "sgmm",
                    n: config.n,
                    p: config.p,
                    k: config.k,
                    q,
                    iter_idx: cycle - 1,
                    seconds,
                });
            }
        }
    }

    if config.include_dense {
        let means = dense_kmeanspp(&rows, config.k, config.seed, 1)?;
        let r0 = dense_bootstrap(&rows, &means);
        let covariance = dense_m_step_cov(&rows, &r0, &means, config.covariance, 1e-6);
        let mut params = MixtureParams { weights: m_step_weights(&r0), means, covariance };
        let (mut resp, _) = dense_e_step(&rows, &params)?;
        for cycle in 0..=config.iters {
            let t0 = Instant::now();
            params.weights = m_step_weights(&resp);
            let means = dense_m_step_means(&rows, &resp);
            params.covariance = dense_m_step_cov(&rows, &resp, &means, config.covariance, 1e-6);
            params.means = means;
            let (next, _) = dense_e_step(&rows, &params)?;
            let seconds = t0.elapsed().as_secs_f64();
            resp = next;
            if cycle > 0 {
                out.push(TimingRow {
                    method: "dense",
                    n: config.n,
                    p: config.p,
                    k: config.k,
                    q: config.p,
                    iter_idx: cycle - 1,
                    seconds,
                });
            }
        }
    }

    Ok(out)
}

fn sketched_cov(
    ds: &crate::sketch::SketchedDataset,
    r: &crate::gmm::Responsibilities,
    means: &[Vec<f64>],
    config: &TimingConfig,
) -> CovarianceModel {
    match config.covariance {
        CovarianceKind::Spherical => {
            CovarianceModel::Spherical { variances: m_step_cov_spherical(ds, r, means, 1e-6) }
        }
        _ => CovarianceModel::Diagonal { variances: m_step_cov_diagonal(ds, r, means, 1e-6) },
    }
}

/// Median and IQR of the timed cycles, grouped by (method, Q) in first-seen order.
pub fn summarize_timings(rows: &[TimingRow]) -> Vec<TimingSummary> {
    let mut groups: Vec<(&'static str, usize, Vec<f64>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(m, q, _)| *m == row.method && *q == row.q) {
            Some((_, _, v)) => v.push(row.seconds),
            None => groups.push((row.method, row.q, vec![row.seconds])),
        }
    }
    groups
        .into_iter()
        .map(|(method, q, mut v)| {
            v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN timings"));
            TimingSummary {
                method,
                q,
                median_seconds: quantile_sorted(&v, 0.5),
                iqr_seconds: quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25),
            }
        })
        .collect()
}

/// Linear interpolation quantile of an ascending slice.
fn quantile_sorted(v: &[f64], f: f64) -> f64 {
    let pos = f * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Least-squares line through (x, y): returns (slope, intercept, R^2). R^2 is 1 for a
/// constant y matched exactly, 0 for a constant y missed.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points for a line");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}

/// Write one CSV row per timed cycle with header `method,N,P,K,Q,iter_idx,seconds`.
pub fn write_timing_csv<W: std::io::Write>(rows: &[TimingRow], mut writer: W) -> Result<()> {
    writeln!(writer, "method,N,P,K,Q,iter_idx,seconds")?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            r.method, r.n, r.p, r.k, r.q, r.iter_idx, r.seconds
        )?;
    }
    Ok(())
}
