//! Gaussian mixture fitting directly on sketched rows.
//!
//! Each row only carries Q of P preconditioned coordinates, so every quantity the EM
//! loop needs is computed against the row's own index set: densities restrict the
//! component covariance to the sampled block, and the M-step accumulates each feature's
//! statistics over exactly the rows that sampled that feature. No densified data is ever
//! materialized; parameters still come out fully P-dimensional.
//!
//! Single-threaded runs are bit-deterministic for a given seed. With
//! `FitConfig::num_threads > 1` rows are processed in fixed contiguous chunks and the
//! per-chunk partial sums are merged in chunk order, so results may differ from the
//! single-threaded run only by floating-point reassociation (observed well below 1e-8
//! in the final log-likelihood).

pub mod stationarity;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precondition::PreconditionOp;
use crate::sketch::{RowSketch, SketchedDataset};

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Covariance structure of a mixture. `Full` exists for the stationarity checker and
/// small diagnostics; the fit loop itself only produces `Spherical` and `Diagonal`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    /// One variance per component.
    Spherical { variances: Vec<f64> },
    /// Per-component, per-feature variances (K x P).
    Diagonal { variances: Vec<Vec<f64>> },
    /// Per-component dense P x P matrices, row-major.
    Full { matrices: Vec<Vec<f64>> },
}

impl CovarianceModel {
    pub fn kind(&self) -> CovarianceKind {
        match self {
            CovarianceModel::Spherical { .. } => CovarianceKind::Spherical,
            CovarianceModel::Diagonal { .. } => CovarianceKind::Diagonal,
            CovarianceModel::Full { .. } => CovarianceKind::Full,
        }
    }
}

/// Covariance structure selector (the fit path accepts Spherical or Diagonal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Spherical,
    Diagonal,
    Full,
}

impl std::fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CovarianceKind::Spherical => "spherical",
            CovarianceKind::Diagonal => "diagonal",
            CovarianceKind::Full => "full",
        };
        f.write_str(s)
    }
}

/// Mixture parameters: weights on the simplex, K means of length P, and a covariance
/// model. Means and covariances live in the preconditioned basis during fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariance: CovarianceModel,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    /// Structural validation (shapes, positive variances, finite entries).
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let p = self.p();
        if k == 0 {
            return Err(Error::invalid("mixture must have at least one component"));
        }
        if self.means.len() != k {
            return Err(Error::invalid("means count must match weights count"));
        }
        if self.means.iter().any(|m| m.len() != p) {
            return Err(Error::invalid("all means must have the same dimension"));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        match &self.covariance {
            CovarianceModel::Spherical { variances } => {
                if variances.len() != k {
                    return Err(Error::invalid("spherical covariance needs K variances"));
                }
                if variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::invalid("variances must be finite and positive"));
                }
            }
            CovarianceModel::Diagonal { variances } => {
                if variances.len() != k || variances.iter().any(|v| v.len() != p) {
                    return Err(Error::invalid("diagonal covariance must be K x P"));
                }
                if variances.iter().flatten().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::invalid("variances must be finite and positive"));
                }
            }
            CovarianceModel::Full { matrices } => {
                if matrices.len() != k || matrices.iter().any(|m| m.len() != p * p) {
                    return Err(Error::invalid("full covariance must be K x (P*P)"));
                }
            }
        }
        Ok(())
    }

    /// Means mapped back to the original (pre-sign-flip, pre-DCT) basis. Covariances
    /// are intentionally not mapped: a diagonal stays diagonal only in the
    /// preconditioned basis, and consumers of original-basis output must treat the
    /// covariance as preconditioned-basis data.
    pub fn original_basis_means(&self, op: &PreconditionOp) -> Vec<Vec<f64>> {
        self.means.iter().map(|m| op.invert(m)).collect()
    }
}

/// Row-stochastic N x K responsibility matrix, stored flat row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Responsibilities {
    pub fn from_flat(n: usize, k: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * k);
        Responsibilities { n, k, data }
    }

    pub fn one_hot(n: usize, k: usize, assignments: &[usize]) -> Self {
        assert_eq!(assignments.len(), n);
        let mut data = vec![0.0; n * k];
        for (i, &a) in assignments.iter().enumerate() {
            assert!(a < k);
            data[i * k + a] = 1.0;
        }
        Responsibilities { n, k, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.k + k]
    }

    /// Per-component totals `sum_i r_ik`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        for row in self.data.chunks_exact(self.k) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Hard labels: per row, the argmax component (lowest index wins ties).
    pub fn hard_labels(&self) -> Vec<u32> {
        self.data
            .chunks_exact(self.k)
            .map(|row| {
                let mut best = 0usize;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best as u32
            })
            .collect()
    }

    /// Check each row sums to 1 within `tol` and entries are in [0, 1].
    pub fn validate_row_stochastic(&self, tol: f64) -> Result<()> {
        for (i, row) in self.data.chunks_exact(self.k.max(1)).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::invalid(format!("responsibility row {i} sums to {sum}")));
            }
            if row.iter().any(|&v| !(-tol..=1.0 + tol).contains(&v)) {
                return Err(Error::invalid(format!("responsibility row {i} out of [0,1]")));
            }
        }
        Ok(())
    }
}

/// Knobs for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub covariance: CovarianceKind,
    pub max_iters: usize,
    /// Relative log-likelihood change threshold: stop when
    /// `|l_t - l_{t-1}| / (|l_t| + 1) < tol`.
    pub tol: f64,
    /// Lower clamp applied to every fitted variance.
    pub variance_floor: f64,
    pub seed: u64,
    /// 1 = deterministic sequential; >1 = fixed-chunk threads.
    pub num_threads: usize,
}

impl FitConfig {
    pub fn new(k: usize, covariance: CovarianceKind, seed: u64) -> Self {
        FitConfig {
            k,
            covariance,
            max_iters: 100,
            tol: 1e-6,
            variance_floor: 1e-6,
            seed,
            num_threads: 1,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if n == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if self.k > n {
            return Err(Error::invalid(format!("k={} exceeds number of rows {n}", self.k)));
        }
        if matches!(self.covariance, CovarianceKind::Full) {
            return Err(Error::invalid("fit supports spherical and diagonal covariances"));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::invalid("tol must be positive and finite"));
        }
        if !self.variance_floor.is_finite() || self.variance_floor <= 0.0 {
            return Err(Error::invalid("variance_floor must be positive and finite"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if self.num_threads == 0 {
            return Err(Error::invalid("num_threads must be >= 1"));
        }
        Ok(())
    }
}

/// Wall-clock seconds spent in each phase of [`fit`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub init_s: f64,
    pub e_step_s: f64,
    pub m_step_s: f64,
}

/// Everything [`fit`] produces.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: MixtureParams,
    pub responsibilities: Responsibilities,
    /// Log-likelihood after init and after each EM cycle; non-decreasing up to
    /// floating-point slack.
    pub loglik_trace: Vec<f64>,
    /// Number of EM cycles (one E-step + one M-step each) performed.
    pub iterations: usize,
    pub converged: bool,
    pub timings: PhaseTimings,
}

impl FitReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Squared Mahalanobis distance of a sketched row to component `k`, using only the
/// row's sampled coordinates: the covariance is restricted to the sampled block and
/// inverted there (for diagonal models that is just a per-coordinate division).
pub fn sparsified_mahalanobis(
    row: &RowSketch,
    mean: &[f64],
    cov: &CovarianceModel,
    k: usize,
) -> f64 {
    match cov {
        CovarianceModel::Spherical { variances } => {
            let mut quad = 0.0;
            for (&idx, &val) in row.indices.iter().zip(&row.values) {
                let d = val - mean[idx as usize];
                quad += d * d;
            }
            quad / variances[k]
        }
        CovarianceModel::Diagonal { variances } => {
            let vk = &variances[k];
            let mut quad = 0.0;
            for (&idx, &val) in row.indices.iter().zip(&row.values) {
                let d = val - mean[idx as usize];
                quad += d * d / vk[idx as usize];
            }
            quad
        }
        CovarianceModel::Full { matrices } => {
            let p = mean.len();
            let block = sampled_block(&matrices[k], p, &row.indices);
            let d: Vec<f64> = row
                .indices
                .iter()
                .zip(&row.values)
                .map(|(&idx, &val)| val - mean[idx as usize])
                .collect();
            let chol = nalgebra::Cholesky::new(block)
                .expect("sampled covariance block must be positive definite");
            let z = chol.solve(&nalgebra::DVector::from_column_slice(&d));
            d.iter().zip(z.iter()).map(|(a, b)| a * b).sum()
        }
    }
}

/// Log density of a sketched row under component `k`: a Q-dimensional Gaussian on the
/// row's sampled coordinates with the covariance restricted to that block. No P/Q
/// rescaling is applied here; responsibilities are ratios so any such factor cancels.
pub fn sparsified_log_density(
    row: &RowSketch,
    mean: &[f64],
    cov: &CovarianceModel,
    k: usize,
) -> f64 {
    let q = row.q() as f64;
    match cov {
        CovarianceModel::Spherical { variances } => {
            let quad = sparsified_mahalanobis(row, mean, cov, k);
            -0.5 * (q * LN_2PI + q * variances[k].ln() + quad)
        }
        CovarianceModel::Diagonal { variances } => {
            let vk = &variances[k];
            let mut quad = 0.0;
            let mut logdet = 0.0;
            for (&idx, &val) in row.indices.iter().zip(&row.values) {
                let v = vk[idx as usize];
                let d = val - mean[idx as usize];
                quad += d * d / v;
                logdet += v.ln();
            }
            -0.5 * (q * LN_2PI + logdet + quad)
        }
        CovarianceModel::Full { matrices } => {
            let p = mean.len();
            let block = sampled_block(&matrices[k], p, &row.indices);
            let chol = nalgebra::Cholesky::new(block)
                .expect("sampled covariance block must be positive definite");
            let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let quad = sparsified_mahalanobis(row, mean, cov, k);
            -0.5 * (q * LN_2PI + logdet + quad)
        }
    }
}

fn sampled_block(matrix: &[f64], p: usize, indices: &[u32]) -> nalgebra::DMatrix<f64> {
    let q = indices.len();
    nalgebra::DMatrix::from_fn(q, q, |a, b| matrix[indices[a] as usize * p + indices[b] as usize])
}

/// E-step: responsibilities and the sketched log-likelihood
/// `sum_i log sum_k w_k p_k(row_i)`, computed in log space with a log-sum-exp.
///
/// Weights are used as given (only ratios matter), so callers may pass unnormalized
/// positive weights and get identical responsibilities.
pub fn e_step(ds: &SketchedDataset, params: &MixtureParams) -> Result<(Responsibilities, f64)> {
    e_step_threaded(ds, params, 1)
}

/// Chunked-parallel E-step; `threads == 1` is the sequential reference path.
pub fn e_step_threaded(
    ds: &SketchedDataset,
    params: &MixtureParams,
    threads: usize,
) -> Result<(Responsibilities, f64)> {
    let n = ds.n();
    let k = params.k();
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut data = vec![0.0; n * k];

    let run_range = |range: std::ops::Range<usize>, out: &mut [f64]| -> Result<f64> {
        let mut ll = 0.0;
        let mut lp = vec![0.0; k];
        for i in range.clone() {
            let row = &ds.rows[i];
            let out_row = &mut out[(i - range.start) * k..(i - range.start + 1) * k];
            for j in 0..k {
                lp[j] =
                    log_w[j] + sparsified_log_density(row, &params.means[j], &params.covariance, j);
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
                out_row[j] = (lp[j] - lse).exp();
            }
            ll += lse;
        }
        Ok(ll)
    };

    let ll = if threads <= 1 || n < 2 * threads {
        run_range(0..n, &mut data)?
    } else {
        let ranges = chunk_ranges(n, threads);
        let mut slices: Vec<&mut [f64]> = Vec::with_capacity(ranges.len());
        let mut rest = data.as_mut_slice();
        for r in &ranges {
            let (head, tail) = rest.split_at_mut((r.end - r.start) * k);
            slices.push(head);
            rest = tail;
        }
        let partials: Vec<Result<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .iter()
                .cloned()
                .zip(slices)
                .map(|(range, slice)| scope.spawn(move || run_range(range, slice)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("e-step worker panicked")).collect()
        });
        // Merge in chunk order so the reduction order is fixed.
        let mut total = 0.0;
        for p in partials {
            total += p?;
        }
        total
    };

    Ok((Responsibilities::from_flat(n, k, data), ll))
}

/// Contiguous near-equal row ranges, one per worker.
fn chunk_ranges(n: usize, threads: usize) -> Vec<std::ops::Range<usize>> {
    let chunk = n.div_ceil(threads);
    (0..threads)
        .map(|t| (t * chunk).min(n)..((t + 1) * chunk).min(n))
        .filter(|r| !r.is_empty())
        .collect()
}

/// M-step for mixture weights: column means of the responsibilities.
pub fn m_step_weights(r: &Responsibilities) -> Vec<f64> {
    let n = r.n() as f64;
    r.column_sums().into_iter().map(|s| s / n).collect()
}

/// M-step for means. Feature p of component k averages the rows that actually sampled
/// p, weighted by responsibility; a feature no row sampled gets 0 (the pseudo-inverse
/// convention). Valid for spherical and diagonal covariance models alike.
pub fn m_step_means(ds: &SketchedDataset, r: &Responsibilities) -> Vec<Vec<f64>> {
    m_step_means_threaded(ds, r, 1)
}

pub fn m_step_means_threaded(
    ds: &SketchedDataset,
    r: &Responsibilities,
    threads: usize,
) -> Vec<Vec<f64>> {
    let p = ds.spec.p;
    let k = r.k();
    let accumulate = |range: std::ops::Range<usize>| -> (Vec<f64>, Vec<f64>) {
        let mut num = vec![0.0; k * p];
        let mut den = vec![0.0; k * p];
        for i in range {
            let row = &ds.rows[i];
            let ri = r.row(i);
            for (&idx, &val) in row.indices.iter().zip(&row.values) {
                let idx = idx as usize;
                for (j, &rij) in ri.iter().enumerate() {
                    num[j * p + idx] += rij * val;
                    den[j * p + idx] += rij;
                }
            }
        }
        (num, den)
    };

    let (num, den) = reduce_chunks(ds.n(), threads, accumulate, |mut a, b| {
        for (x, y) in a.0.iter_mut().zip(&b.0) {
            *x += y;
        }
        for (x, y) in a.1.iter_mut().zip(&b.1) {
            *x += y;
        }
        a
    });

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

/// M-step for per-feature variances: responsibility-weighted mean squared deviation
/// over the rows sampling each feature, clamped below by `floor`. Features with no
/// coverage get exactly `floor`.
pub fn m_step_cov_diagonal(
    ds: &SketchedDataset,
    r: &Responsibilities,
    means: &[Vec<f64>],
    floor: f64,
) -> Vec<Vec<f64>> {
    m_step_cov_diagonal_threaded(ds, r, means, floor, 1)
}

pub fn m_step_cov_diagonal_threaded(
    ds: &SketchedDataset,
    r: &Responsibilities,
    means: &[Vec<f64>],
    floor: f64,
    threads: usize,
) -> Vec<Vec<f64>> {
    let p = ds.spec.p;
    let k = r.k();
    let accumulate = |range: std::ops::Range<usize>| -> (Vec<f64>, Vec<f64>) {
        let mut num = vec![0.0; k * p];
        let mut den = vec![0.0; k * p];
        for i in range {
            let row = &ds.rows[i];
            let ri = r.row(i);
            for (&idx, &val) in row.indices.iter().zip(&row.values) {
                let idx = idx as usize;
                for (j, &rij) in ri.iter().enumerate() {
                    let d = val - means[j][idx];
                    num[j * p + idx] += rij * d * d;
                    den[j * p + idx] += rij;
                }
            }
        }
        (num, den)
    };
    let (num, den) = reduce_chunks(ds.n(), threads, accumulate, |mut a, b| {
        for (x, y) in a.0.iter_mut().zip(&b.0) {
            *x += y;
        }
        for (x, y) in a.1.iter_mut().zip(&b.1) {
            *x += y;
        }
        a
    });

    (0..k)
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
        .collect()
}

/// M-step for one shared variance per component:
/// `s_k = sum_i r_ik ||row_i - mean_k||^2 / (Q sum_i r_ik)`, clamped below by `floor`.
pub fn m_step_cov_spherical(
    ds: &SketchedDataset,
    r: &Responsibilities,
    means: &[Vec<f64>],
    floor: f64,
) -> Vec<f64> {
    m_step_cov_spherical_threaded(ds, r, means, floor, 1)
}

pub fn m_step_cov_spherical_threaded(
    ds: &SketchedDataset,
    r: &Responsibilities,
    means: &[Vec<f64>],
    floor: f64,
    threads: usize,
) -> Vec<f64> {
    let k = r.k();
    let q = ds.spec.q as f64;
    let accumulate = |range: std::ops::Range<usize>| -> (Vec<f64>, Vec<f64>) {
        let mut num = vec![0.0; k];
        let mut den = vec![0.0; k];
        for i in range {
            let row = &ds.rows[i];
            let ri = r.row(i);
            for (j, &rij) in ri.iter().enumerate() {
                let mut quad = 0.0;
                for (&idx, &val) in row.indices.iter().zip(&row.values) {
                    let d = val - means[j][idx as usize];
                    quad += d * d;
                }
                num[j] += rij * quad;
                den[j] += rij;
            }
        }
        (num, den)
    };
    let (num, den) = reduce_chunks(ds.n(), threads, accumulate, |mut a, b| {
        for (x, y) in a.0.iter_mut().zip(&b.0) {
            *x += y;
        }
        for (x, y) in a.1.iter_mut().zip(&b.1) {
            *x += y;
        }
        a
    });
    (0..k).map(|j| if den[j] > 0.0 { (num[j] / (q * den[j])).max(floor) } else { floor }).collect()
}

fn reduce_chunks<T, A, M>(n: usize, threads: usize, accumulate: A, merge: M) -> T
where
    T: Send,
    A: Fn(std::ops::Range<usize>) -> T + Sync,
    M: Fn(T, T) -> T,
{
    if threads <= 1 || n < 2 * threads {
        return accumulate(0..n);
    }
    let ranges = chunk_ranges(n, threads);
    let partials: Vec<T> = std::thread::scope(|scope| {
        let handles: Vec<_> =
            ranges.into_iter().map(|range| scope.spawn(|| accumulate(range))).collect();
        handles.into_iter().map(|h| h.join().expect("m-step worker panicked")).collect()
    });
    let mut iter = partials.into_iter();
    let first = iter.next().expect("at least one chunk");
    iter.fold(first, merge)
}

/// Independent EM chains per fit (single-component fits need only one). Each chain
/// runs from its own seeding to convergence and the best final log-likelihood wins;
/// converged log-likelihoods of distinct initialization basins differ by hundreds of
/// nats, so the selection is unambiguous where it matters.
const INIT_CHAINS: usize = 4;

/// Seed for chain `c` of a fit seeded with `seed`; chain 0 keeps `seed`.
pub(crate) fn candidate_seed(seed: u64, c: usize) -> u64 {
    seed.wrapping_add((c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Near-tie guard for chain selection: a later chain must beat the incumbent by more
/// than FP noise, so chains that land on the same fixpoint keep the earliest one.
pub(crate) fn clearly_better(challenger: f64, incumbent: f64) -> bool {
    challenger > incumbent + 1e-9 * (incumbent.abs() + 1.0)
}

/// EM state for one chain.
struct EmState {
    params: MixtureParams,
    resp: Responsibilities,
    ll: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Fit a K-component mixture to sketched data by EM.
///
/// Several independent chains run, each seeded by greedy k-means++ on the sketches,
/// a hard-assignment bootstrap, then weights and covariances from the bootstrap
/// responsibilities. Every chain iterates until the relative log-likelihood change
/// drops below `tol` or `max_iters` is hit, and the chain with the highest final
/// log-likelihood is returned (near-ties keep the earliest chain). A component whose
/// responsibility mass collapses (below `K * 1e-10`) is reseeded at the sketched
/// point with the lowest maximum responsibility.
pub fn fit(ds: &SketchedDataset, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate(ds.n())?;
    let mut timings = PhaseTimings::default();
    let chains = if cfg.k > 1 { INIT_CHAINS } else { 1 };

    let mut best: Option<EmState> = None;
    for c in 0..chains {
        let t0 = Instant::now();
        let means = crate::init::kmeanspp_init_greedy(ds, cfg.k, candidate_seed(cfg.seed, c))?;
        let r0 = crate::init::bootstrap_responsibilities(ds, &means);
        let weights = m_step_weights(&r0);
        let covariance = fit_covariance(ds, &r0, &means, cfg);
        let params = MixtureParams { weights, means, covariance };
        timings.init_s += t0.elapsed().as_secs_f64();

        let te = Instant::now();
        let (resp, ll) =
            e_step_threaded(ds, &params, cfg.num_threads).map_err(|e| at_iteration(e, 0))?;
        timings.e_step_s += te.elapsed().as_secs_f64();
        let mut state =
            EmState { params, resp, ll, trace: vec![ll], iterations: 0, converged: false };
        em_cycles(ds, cfg, &mut state, &mut timings, cfg.max_iters)?;
        if best.as_ref().is_none_or(|b| clearly_better(state.ll, b.ll)) {
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
        timings,
    })
}

/// Run up to `budget` M+E cycles, stopping early on convergence (recorded in
/// `state.converged`).
fn em_cycles(
    ds: &SketchedDataset,
    cfg: &FitConfig,
    state: &mut EmState,
    timings: &mut PhaseTimings,
    budget: usize,
) -> Result<()> {
    for _ in 0..budget {
        let tm = Instant::now();
        state.params.weights = m_step_weights(&state.resp);
        let mut means = m_step_means_threaded(ds, &state.resp, cfg.num_threads);
        rescue_empty_components(ds, &state.resp, &mut means, cfg.k);
        state.params.covariance = fit_covariance(ds, &state.resp, &means, cfg);
        state.params.means = means;
        timings.m_step_s += tm.elapsed().as_secs_f64();
        state.iterations += 1;

        let te = Instant::now();
        let (next_resp, next_ll) = e_step_threaded(ds, &state.params, cfg.num_threads)
            .map_err(|e| at_iteration(e, state.iterations))?;
        timings.e_step_s += te.elapsed().as_secs_f64();
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

/// Run `restarts` independent fits, seeding restart r with `cfg.seed + r`, and keep
/// the one with the highest final log-likelihood. Ties keep the earliest restart, so
/// the result is a deterministic function of (data, config, restarts).
pub fn fit_restarts(ds: &SketchedDataset, cfg: &FitConfig, restarts: usize) -> Result<FitReport> {
    if restarts == 0 {
        return Err(Error::invalid("need at least one restart"));
    }
    let mut best: Option<FitReport> = None;
    for r in 0..restarts {
        let attempt = fit(ds, &FitConfig { seed: cfg.seed + r as u64, ..*cfg })?;
        let better = match &best {
            Some(b) => attempt.final_loglik() > b.final_loglik(),
            None => true,
        };
        if better {
            best = Some(attempt);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn fit_covariance(
    ds: &SketchedDataset,
    r: &Responsibilities,
    means: &[Vec<f64>],
    cfg: &FitConfig,
) -> CovarianceModel {
    match cfg.covariance {
        CovarianceKind::Spherical => CovarianceModel::Spherical {
            variances: m_step_cov_spherical_threaded(
                ds,
                r,
                means,
                cfg.variance_floor,
                cfg.num_threads,
            ),
        },
        CovarianceKind::Diagonal => CovarianceModel::Diagonal {
            variances: m_step_cov_diagonal_threaded(
                ds,
                r,
                means,
                cfg.variance_floor,
                cfg.num_threads,
            ),
        },
        CovarianceKind::Full => unreachable!("rejected by FitConfig::validate"),
    }
}

/// Reseed any component whose responsibility mass collapsed: its mean jumps to the
/// (zero-filled) sketched point currently worst explained by every component. Rows and
/// components are consumed in deterministic order.
fn rescue_empty_components(
    ds: &SketchedDataset,
    r: &Responsibilities,
    means: &mut [Vec<f64>],
    k: usize,
) {
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
    let mut worst: Vec<(f64, usize)> = (0..ds.n())
        .map(|i| {
            let max = r.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (max, i)
        })
        .collect();
    worst.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (j, (_, row)) in empty.into_iter().zip(worst) {
        means[j] = ds.densify_row(row);
    }
}

fn at_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::NumericalDegeneracy { row, msg } => {
            Error::NumericalDegeneracy { row, msg: format!("{msg} (EM iteration {iteration})") }
        }
        other => other,
    }
}
