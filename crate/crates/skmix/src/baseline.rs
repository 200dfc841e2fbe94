//! Reference fits the sketched pipeline is judged against: classical dense EM and
//! Lloyd k-means, in dense and sketched flavors.
//!
//! `dense_fit` deliberately repeats the EM skeleton instead of delegating to
//! [`crate::gmm::fit`]: it mirrors the same seeding discipline, update order, and
//! convergence rule on full vectors, so that the full-sampling equivalence test between
//! the two stacks checks the sketched math against an independently written reference
//! rather than against itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmm::{
    CovarianceKind, CovarianceModel, FitConfig, FitReport, MixtureParams, PhaseTimings,
    Responsibilities,
};
use crate::init::{kmeanspp_init, sketched_dist2};
use crate::sketch::SketchedDataset;

const LN_2PI: f64 = 1.8378770664093453;

fn dense_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ on dense rows, consuming the RNG exactly like the sketched seeding does
/// (one uniform draw for the first seed, one draw per candidate per further seed while
/// total distance mass is positive). `candidates = 1` is plain k-means++; larger
/// values keep the potential-minimizing candidate, mirroring the sketched greedy
/// variant.
pub(crate) fn dense_kmeanspp(
    x: &[Vec<f64>],
    k: usize,
    seed: u64,
    candidates: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds number of rows {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut means = vec![x[first].clone()];
    let mut d2: Vec<f64> = x.iter().map(|row| dense_dist2(row, &means[0])).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        if total > 0.0 {
            let mut best: Option<(usize, f64, Vec<f64>)> = None;
            for _ in 0..candidates.max(1) {
                let u = rng.random::<f64>() * total;
                let mut cum = 0.0;
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    cum += w;
                    if u < cum {
                        pick = i;
                        break;
                    }
                }
                let mut next_d2 = d2.clone();
                let mut potential = 0.0;
                for (i, slot) in next_d2.iter_mut().enumerate() {
                    let d = dense_dist2(&x[i], &x[pick]);
                    if d < *slot {
                        *slot = d;
                    }
                    potential += *slot;
                }
                if best.as_ref().is_none_or(|(_, p, _)| potential < *p) {
                    best = Some((pick, potential, next_d2));
                }
            }
            let (pick, _, next_d2) = best.expect("at least one candidate");
            chosen[pick] = true;
            d2 = next_d2;
            means.push(x[pick].clone());
        } else {
            let next = (0..n).find(|&i| !chosen[i]).expect("k <= n guarantees an unchosen row");
            chosen[next] = true;
            let mean = x[next].clone();
            for (i, slot) in d2.iter_mut().enumerate() {
                let d = dense_dist2(&x[i], &mean);
                if d < *slot {
                    *slot = d;
                }
            }
            means.push(mean);
        }
    }
    Ok(means)
}

pub(crate) fn dense_bootstrap(x: &[Vec<f64>], means: &[Vec<f64>]) -> Responsibilities {
    let assignments: Vec<usize> = x
        .iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_d = dense_dist2(row, &means[0]);
            for (j, mean) in means.iter().enumerate().skip(1) {
                let d = dense_dist2(row, mean);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    Responsibilities::one_hot(x.len(), means.len(), &assignments)
}

fn dense_log_density(x: &[f64], mean: &[f64], cov: &CovarianceModel, k: usize) -> f64 {
    let p = x.len() as f64;
    match cov {
        CovarianceModel::Spherical { variances } => {
            let mut quad = 0.0;
            for (v, m) in x.iter().zip(mean) {
                let d = v - m;
                quad += d * d;
            }
            let s = variances[k];
            -0.5 * (p * LN_2PI + p * s.ln() + quad / s)
        }
        CovarianceModel::Diagonal { variances } => {
            let vk = &variances[k];
            let mut quad = 0.0;
            let mut logdet = 0.0;
            for ((v, m), s) in x.iter().zip(mean).zip(vk) {
                let d = v - m;
                quad += d * d / s;
                logdet += s.ln();
            }
            -0.5 * (p * LN_2PI + logdet + quad)
        }
        CovarianceModel::Full { .. } => {
            unreachable!("dense baseline fits are diagonal or spherical")
        }
    }
}

pub(crate) fn dense_e_step(
    x: &[Vec<f64>],
    params: &MixtureParams,
) -> Result<(Responsibilities, f64)> {
    let n = x.len();
    let k = params.k();
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut data = vec![0.0; n * k];
    let mut ll = 0.0;
    let mut lp = vec![0.0; k];
    for (i, row) in x.iter().enumerate() {
        for j in 0..k {
            lp[j] = log_w[j] + dense_log_density(row, &params.means[j], &params.covariance, j);
        }
        let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::NumericalDegeneracy {
                row: i,
                msg: "all component densities vanished".into(),
            });
        }
        let sum_exp: f64 = lp.iter().map(|v| (v - m).exp()).sum();
        let lse = m + sum_exp.ln();
        for j in 0..k {
            data[i * k + j] = (lp[j] - lse).exp();
        }
        ll += lse;
    }
    Ok((Responsibilities::from_flat(n, k, data), ll))
}

pub(crate) fn dense_m_step_means(x: &[Vec<f64>], r: &Responsibilities) -> Vec<Vec<f64>> {
    let p = x[0].len();
    let k = r.k();
    let mut num = vec![0.0; k * p];
    let mut den = vec![0.0; k * p];
    for (i, row) in x.iter().enumerate() {
        let ri = r.row(i);
        for (idx, &val) in row.iter().enumerate() {
            for (j, &rij) in ri.iter().enumerate() {
                num[j * p + idx] += rij * val;
                den[j * p + idx] += rij;
            }
        }
    }
    (0..k)
        .map(|j| {
            (0..p)
                .map(|idx| {
                    let d = den[j * p + idx];
                    if d > 0.0 {
                        num[j * p + idx] / d
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub(crate) fn dense_m_step_cov(
    x: &[Vec<f64>],
    r: &Responsibilities,
    means: &[Vec<f64>],
    kind: CovarianceKind,
    floor: f64,
) -> CovarianceModel {
    let p = x[0].len();
    let k = r.k();
    match kind {
        CovarianceKind::Diagonal => {
            let mut num = vec![0.0; k * p];
            let mut den = vec![0.0; k * p];
            for (i, row) in x.iter().enumerate() {
                let ri = r.row(i);
                for (idx, &val) in row.iter().enumerate() {
                    for (j, &rij) in ri.iter().enumerate() {
                        let d = val - means[j][idx];
                        num[j * p + idx] += rij * d * d;
                        den[j * p + idx] += rij;
                    }
                }
            }
            let variances = (0..k)
                .map(|j| {
                    (0..p)
                        .map(|idx| {
                            let d = den[j * p + idx];
                            if d > 0.0 {
                                (num[j * p + idx] / d).max(floor)
                            } else {
                                floor
                            }
                        })
                        .collect()
                })
                .collect();
            CovarianceModel::Diagonal { variances }
        }
        CovarianceKind::Spherical => {
            let mut num = vec![0.0; k];
            let mut den = vec![0.0; k];
            for (i, row) in x.iter().enumerate() {
                let ri = r.row(i);
                for (j, &rij) in ri.iter().enumerate() {
                    let mut quad = 0.0;
                    for (idx, &val) in row.iter().enumerate() {
                        let d = val - means[j][idx];
                        quad += d * d;
                    }
                    num[j] += rij * quad;
                    den[j] += rij;
                }
            }
            let variances =
                (0..k)
                    .map(|j| {
                        if den[j] > 0.0 {
                            (num[j] / (p as f64 * den[j])).max(floor)
                        } else {
                            floor
                        }
                    })
                    .collect();
            CovarianceModel::Spherical { variances }
        }
        CovarianceKind::Full => unreachable!("rejected by FitConfig::validate"),
    }
}

fn dense_rescue(x: &[Vec<f64>], r: &Responsibilities, means: &mut [Vec<f64>], k: usize) {
    let threshold = k as f64 * 1e-10;
    let empty: Vec<usize> = r
        .column_sums()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < threshold)
        .map(|(j, _)| j)
        .collect();
    if empty.is_empty() {
        return;
    }
    let mut worst: Vec<(f64, usize)> = (0..x.len())
        .map(|i| (r.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max), i))
        .collect();
    worst.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (j, (_, row)) in empty.into_iter().zip(worst) {
        means[j] = x[row].clone();
    }
}

/// Classical EM on dense rows, mirroring the sketched fit's seeding, update order,
/// convergence rule, and empty-component rescue. `num_threads` is ignored (the dense
/// reference stays sequential). The caller chooses the basis of `x`.
pub fn dense_fit(x: &[Vec<f64>], cfg: &FitConfig) -> Result<FitReport> {
    if x.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let p = x[0].len();
    if x.iter().any(|row| row.len() != p) {
        return Err(Error::invalid("all rows must have the same dimension"));
    }
    if cfg.k == 0 || cfg.k > x.len() {
        return Err(Error::invalid(format!("k={} out of range for {} rows", cfg.k, x.len())));
    }
    if matches!(cfg.covariance, CovarianceKind::Full) {
        return Err(Error::invalid("fit supports spherical and diagonal covariances"));
    }

    // Same multi-chain scheme as the sketched fit: every chain runs to convergence
    // and the best final log-likelihood wins (near-ties keep the earliest chain).
    let chains = if cfg.k > 1 { 4 } else { 1 };
    let mut best: Option<DenseEmState> = None;
    for c in 0..chains {
        let means = dense_kmeanspp(
            x,
            cfg.k,
            crate::gmm::candidate_seed(cfg.seed, c),
            crate::init::greedy_candidates(cfg.k),
        )?;
        let r0 = dense_bootstrap(x, &means);
        let weights = crate::gmm::m_step_weights(&r0);
        let covariance = dense_m_step_cov(x, &r0, &means, cfg.covariance, cfg.variance_floor);
        let params = MixtureParams { weights, means, covariance };
        let (resp, ll) = dense_e_step(x, &params)?;
        let mut state =
            DenseEmState { params, resp, ll, trace: vec![ll], iterations: 0, converged: false };
        dense_em_cycles(x, cfg, &mut state, cfg.max_iters)?;
        if best.as_ref().is_none_or(|b| crate::gmm::clearly_better(state.ll, b.ll)) {
            best = Some(state);
        }
    }

    let state = best.expect("at least one chain");
    Ok(FitReport {
        params: state.params,
        responsibilities: state.resp,
        loglik_trace: state.trace,
        iterations: state.iterations,
        converged: state.converged,
        timings: PhaseTimings::default(),
    })
}

struct DenseEmState {
    params: MixtureParams,
    resp: Responsibilities,
    ll: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn dense_em_cycles(
    x: &[Vec<f64>],
    cfg: &FitConfig,
    state: &mut DenseEmState,
    budget: usize,
) -> Result<()> {
    for _ in 0..budget {
        state.params.weights = crate::gmm::m_step_weights(&state.resp);
        let mut means = dense_m_step_means(x, &state.resp);
        dense_rescue(x, &state.resp, &mut means, cfg.k);
        state.params.covariance =
            dense_m_step_cov(x, &state.resp, &means, cfg.covariance, cfg.variance_floor);
        state.params.means = means;
        state.iterations += 1;

        let (next_resp, next_ll) = dense_e_step(x, &state.params)?;
        state.resp = next_resp;
        state.trace.push(next_ll);
        let rel = (next_ll - state.ll).abs() / (next_ll.abs() + 1.0);
        state.ll = next_ll;
        if rel < cfg.tol {
            state.converged = true;
            return Ok(());
        }
    }
    Ok(())
}

/// What a Lloyd run produces: final centers, hard labels, and the within-cluster
/// squared-distance objective after each assignment pass (non-increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansReport {
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd k-means on dense rows with k-means++ seeding. Stops when assignments repeat
/// or `max_iters` passes have run. An emptied cluster is reseeded at the point farthest
/// from its assigned center.
pub fn kmeans_fit_dense(
    x: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KmeansReport> {
    if x.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let p = x[0].len();
    if x.iter().any(|row| row.len() != p) {
        return Err(Error::invalid("all rows must have the same dimension"));
    }
    let mut centers = dense_kmeanspp(x, k, seed, 1)?;
    let n = x.len();
    let mut labels = vec![u32::MAX; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut inertia = 0.0;
        let mut changed = false;
        for (i, row) in x.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = dense_dist2(row, &centers[0]);
            for (j, c) in centers.iter().enumerate().skip(1) {
                let d = dense_dist2(row, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            inertia += best_d;
            if labels[i] != best as u32 {
                labels[i] = best as u32;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        let mut sum = vec![vec![0.0; p]; k];
        let mut count = vec![0usize; k];
        for (i, row) in x.iter().enumerate() {
            let c = labels[i] as usize;
            count[c] += 1;
            for (s, &v) in sum[c].iter_mut().zip(row) {
                *s += v;
            }
        }
        for j in 0..k {
            if count[j] > 0 {
                for s in &mut sum[j] {
                    *s /= count[j] as f64;
                }
                centers[j] = std::mem::take(&mut sum[j]);
            }
        }
        let empty: Vec<usize> =
            count.iter().enumerate().filter(|(_, &c)| c == 0).map(|(j, _)| j).collect();
        if !empty.is_empty() {
            // Farthest-point reseeding, consumed in deterministic order.
            let mut far: Vec<(f64, usize)> = x
                .iter()
                .enumerate()
                .map(|(i, row)| (-dense_dist2(row, &centers[labels[i] as usize]), i))
                .collect();
            far.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (j, (_, row)) in empty.into_iter().zip(far) {
                centers[j] = x[row].clone();
            }
        }
    }
    Ok(KmeansReport { centers, labels, inertia_trace: trace, iterations, converged })
}

/// Lloyd k-means directly on sketches. Seeding and assignment use sketched distances;
/// the update step averages, per feature, the member rows that sampled that feature.
/// A feature no member sampled keeps the center's previous value.
pub fn kmeans_fit_sketched(
    ds: &SketchedDataset,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KmeansReport> {
    let n = ds.n();
    let p = ds.spec.p;
    let mut centers = kmeanspp_init(ds, k, seed)?;
    let mut labels = vec![u32::MAX; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut inertia = 0.0;
        let mut changed = false;
        for (row, label) in ds.rows.iter().zip(labels.iter_mut()) {
            let mut best = 0usize;
            let mut best_d = sketched_dist2(row, &centers[0]);
            for (j, c) in centers.iter().enumerate().skip(1) {
                let d = sketched_dist2(row, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            inertia += best_d;
            if *label != best as u32 {
                *label = best as u32;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        let mut sum = vec![vec![0.0; p]; k];
        let mut cover = vec![vec![0.0; p]; k];
        let mut count = vec![0usize; k];
        for (row, &label) in ds.rows.iter().zip(&labels) {
            let c = label as usize;
            count[c] += 1;
            for (&idx, &val) in row.indices.iter().zip(&row.values) {
                sum[c][idx as usize] += val;
                cover[c][idx as usize] += 1.0;
            }
        }
        for j in 0..k {
            if count[j] == 0 {
                continue;
            }
            for idx in 0..p {
                if cover[j][idx] > 0.0 {
                    centers[j][idx] = sum[j][idx] / cover[j][idx];
                }
            }
        }
        let empty: Vec<usize> =
            count.iter().enumerate().filter(|(_, &c)| c == 0).map(|(j, _)| j).collect();
        if !empty.is_empty() {
            let mut far: Vec<(f64, usize)> = (0..n)
                .map(|i| (-sketched_dist2(&ds.rows[i], &centers[labels[i] as usize]), i))
                .collect();
            far.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (j, (_, row)) in empty.into_iter().zip(far) {
                centers[j] = ds.densify_row(row);
            }
        }
    }
    Ok(KmeansReport { centers, labels, inertia_trace: trace, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{sketch_matrix, SketchSpec};
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    /// Two well-separated spherical blobs around +/- `shift * e0`.
    fn two_blobs(n_per: usize, p: usize, shift: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for sign in [-1.0, 1.0] {
            for _ in 0..n_per {
                let mut row: Vec<f64> = (0..p).map(|_| noise.sample(&mut rng)).collect();
                row[0] += sign * shift;
                rows.push(row);
                labels.push(if sign < 0.0 { 0 } else { 1 });
            }
        }
        (rows, labels)
    }

    fn split_accuracy(pred: &[u32], truth: &[u32]) -> f64 {
        let n = pred.len() as f64;
        let agree = pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64;
        (agree / n).max(1.0 - agree / n)
    }

    #[test]
    fn dense_em_recovers_two_separated_blobs() {
        let (x, truth) = two_blobs(60, 4, 4.0, 5);
        let cfg = FitConfig::new(2, CovarianceKind::Diagonal, 3);
        let report = dense_fit(&x, &cfg).unwrap();
        assert!(report.converged);
        for w in report.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * (w[0].abs() + 1.0));
        }
        let labels = report.responsibilities.hard_labels();
        assert!(split_accuracy(&labels, &truth) > 0.97);
        // One mean near -4 e0, the other near +4 e0 (order depends on seeding).
        let mut first = report.params.means.iter().map(|m| m[0]).collect::<Vec<_>>();
        first.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(first[0], -4.0, epsilon = 0.3);
        assert_relative_eq!(first[1], 4.0, epsilon = 0.3);
        let wsum: f64 = report.params.weights.iter().sum();
        assert_relative_eq!(wsum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dense_kmeans_partitions_separated_blobs() {
        let (x, truth) = two_blobs(50, 3, 5.0, 9);
        let report = kmeans_fit_dense(&x, 2, 1, 100).unwrap();
        assert!(report.converged);
        assert_eq!(split_accuracy(&report.labels, &truth), 1.0);
        for w in report.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn sketched_kmeans_with_full_sampling_matches_dense() {
        let (x, _) = two_blobs(25, 5, 3.0, 13);
        let spec = SketchSpec { p: 5, q: 5, q_shared: 2, seed: 8 };
        let ds = sketch_matrix(&x, &spec).unwrap();
        let pre: Vec<Vec<f64>> = x.iter().map(|row| ds.precondition.apply(row)).collect();
        let a = kmeans_fit_sketched(&ds, 3, 21, 100).unwrap();
        let b = kmeans_fit_dense(&pre, 3, 21, 100).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.iterations, b.iterations);
        for (ta, tb) in a.inertia_trace.iter().zip(&b.inertia_trace) {
            assert!((ta - tb).abs() <= 1e-10 * (1.0 + ta.abs()));
        }
        for (ca, cb) in a.centers.iter().zip(&b.centers) {
            for (va, vb) in ca.iter().zip(cb) {
                assert!((va - vb).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn sketched_kmeans_objective_is_monotone() {
        for seed in 0..5u64 {
            let (x, _) = two_blobs(40, 8, 2.0, 100 + seed);
            let spec = SketchSpec { p: 8, q: 4, q_shared: 2, seed: 30 + seed };
            let ds = sketch_matrix(&x, &spec).unwrap();
            let report = kmeans_fit_sketched(&ds, 3, seed, 100).unwrap();
            for w in report.inertia_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {seed}: inertia rose");
            }
        }
    }

    #[test]
    fn full_sampling_em_equals_dense_em() {
        // The sketched stack at Q = P must walk the exact same EM trajectory as the
        // independently written dense reference, applied to preconditioned rows.
        let (x, _) = two_blobs(30, 5, 3.0, 17);
        let spec = SketchSpec { p: 5, q: 5, q_shared: 0, seed: 11 };
        let ds = sketch_matrix(&x, &spec).unwrap();
        let pre: Vec<Vec<f64>> = x.iter().map(|row| ds.precondition.apply(row)).collect();
        for kind in [CovarianceKind::Diagonal, CovarianceKind::Spherical] {
            let cfg = FitConfig::new(2, kind, 23);
            let sk = crate::gmm::fit(&ds, &cfg).unwrap();
            let de = dense_fit(&pre, &cfg).unwrap();
            assert_eq!(sk.iterations, de.iterations);
            assert_eq!(sk.loglik_trace.len(), de.loglik_trace.len());
            for (a, b) in sk.loglik_trace.iter().zip(&de.loglik_trace) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
            }
            for (ma, mb) in sk.params.means.iter().zip(&de.params.means) {
                for (va, vb) in ma.iter().zip(mb) {
                    assert!((va - vb).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn emptied_cluster_is_reseeded_far_away() {
        // Three centers on five distinct points collapse easily; the run must end with
        // finite centers and a valid labeling whatever happens in between.
        let x = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![10.0, 10.0],
            vec![10.1, 10.0],
        ];
        let report = kmeans_fit_dense(&x, 3, 0, 50).unwrap();
        assert!(report.converged);
        assert_eq!(report.labels.len(), 5);
        assert!(report.centers.iter().flatten().all(|v| v.is_finite()));
    }
}
