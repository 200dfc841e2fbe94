//! Synthetic mixed-scale clusters: a few large, diffuse Gaussians plus a few small,
//! tight ones, drawn in a low-dimensional latent space and embedded into P dimensions
//! through a random orthonormal injection.
//!
//! Construction details that the experiments lean on:
//! - Cluster covariances are isotropic in the latent space: sigma^2 for big clusters
//!   and sigma^2 / variance_ratio for small ones, and each cluster's sample is
//!   whitened exactly (centered, then decorrelated against its own sample covariance),
//!   so the empirical spectral norms hit the `variance_ratio` on the nose instead of
//!   drifting with sampling noise.
//! - Big-cluster means are a random orthonormal frame scaled by `MEAN_SCALE`, so all
//!   big-big separations are equal by construction; each small cluster sits
//!   `SMALL_OFFSET` big-sigmas from the mean of the big cluster it shadows (at the
//!   default offset of zero, exactly on top of it). Small clusters are therefore
//!   spatially entangled with big ones and visible only through their variance, which
//!   is exactly the regime where mean-only methods lose them.
//! - The embedding is a fresh random orthonormal P x d_latent matrix per seed, so no
//!   coordinate of the output space is special.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Length of each big-cluster mean, in latent units. Big means are a random
/// orthonormal frame scaled by this, so every pair of big clusters sits exactly
/// `MEAN_SCALE * sqrt(2)` big-sigmas apart and the difficulty of the problem is
/// stable from seed to seed instead of riding on the closest random pair.
pub const MEAN_SCALE: f64 = 3.18;

/// Distance from each small cluster's mean to its host big cluster's mean, in units
/// of the big cluster's sigma. The default buries each small cluster exactly at its
/// host's center, so position carries no information about it at all and only the
/// variance gap can reveal it.
pub const SMALL_OFFSET: f64 = 0.0;

/// Shape of a generated dataset. Defaults reproduce three big and two small clusters,
/// 250 and 50 points each, latent dimension 20, embedded into 100 dimensions, with a
/// 10x spectral-norm gap between big and small covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub k_big: usize,
    pub k_small: usize,
    pub n_big: usize,
    pub n_small: usize,
    pub d_latent: usize,
    pub p: usize,
    pub variance_ratio: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            k_big: 3,
            k_small: 2,
            n_big: 250,
            n_small: 50,
            d_latent: 20,
            p: 100,
            variance_ratio: 10.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn n_total(&self) -> usize {
        self.k_big * self.n_big + self.k_small * self.n_small
    }

    pub fn k_total(&self) -> usize {
        self.k_big + self.k_small
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_big == 0 || self.k_small == 0 {
            return Err(Error::invalid("need at least one big and one small cluster"));
        }
        if self.d_latent == 0 || self.d_latent > self.p {
            return Err(Error::invalid("latent dimension must satisfy 1 <= d_latent <= P"));
        }
        // The big means form an orthonormal frame, which needs one dimension each.
        if self.k_big > self.d_latent {
            return Err(Error::invalid("need d_latent >= k_big"));
        }
        if !self.variance_ratio.is_finite() || self.variance_ratio <= 0.0 {
            return Err(Error::invalid("variance_ratio must be positive and finite"));
        }
        // Exact whitening needs strictly more points than latent dimensions per cluster.
        if self.n_big <= self.d_latent || self.n_small <= self.d_latent {
            return Err(Error::invalid(format!(
                "per-cluster counts must exceed d_latent={} for exact whitening",
                self.d_latent
            )));
        }
        Ok(())
    }
}

/// Generated rows with ground-truth labels. Labels 0..k_big are big clusters,
/// k_big..k_big+k_small the small ones; rows are grouped by label.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    /// Embedded (P-dimensional) cluster means, indexed by label.
    pub means: Vec<Vec<f64>>,
    pub spec: SynthSpec,
}

/// Draw a dataset per `spec` with the default geometry constants. Deterministic in
/// `spec.seed`; label counts match the spec exactly.
pub fn make_synthetic(spec: &SynthSpec) -> Result<SynthDataset> {
    make_synthetic_with(spec, MEAN_SCALE, SMALL_OFFSET)
}

/// [`make_synthetic`] with explicit geometry: `mean_scale` replaces [`MEAN_SCALE`] and
/// `small_offset` replaces [`SMALL_OFFSET`].
pub fn make_synthetic_with(
    spec: &SynthSpec,
    mean_scale: f64,
    small_offset: f64,
) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.d_latent;
    let sigma_big = 1.0;
    let sigma_small = (1.0 / spec.variance_ratio).sqrt();

    // Latent cluster means: big ones on a random orthonormal frame scaled to
    // `mean_scale` (equidistant pairs), small ones pinned near their hosts.
    let mut latent_means: Vec<Vec<f64>> = Vec::with_capacity(spec.k_total());
    let g = DMatrix::from_fn(d, spec.k_big, |_, _| draw_normal(&mut rng));
    let frame = g.qr().q();
    for c in 0..spec.k_big {
        latent_means.push((0..d).map(|j| mean_scale * frame[(j, c)]).collect());
    }
    for t in 0..spec.k_small {
        let host = &latent_means[t % spec.k_big];
        let mut dir: Vec<f64> = (0..d).map(|_| draw_normal(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut dir {
            *v /= norm;
        }
        latent_means
            .push(host.iter().zip(&dir).map(|(h, u)| h + small_offset * sigma_big * u).collect());
    }

    // Per-cluster latent samples, whitened to an exactly isotropic sample covariance.
    let mut latent_rows: Vec<Vec<f64>> = Vec::with_capacity(spec.n_total());
    let mut labels: Vec<u32> = Vec::with_capacity(spec.n_total());
    for (c, mean) in latent_means.iter().enumerate() {
        let (n_c, sigma) =
            if c < spec.k_big { (spec.n_big, sigma_big) } else { (spec.n_small, sigma_small) };
        let cloud = whitened_cloud(&mut rng, n_c, d, sigma)?;
        for point in cloud {
            latent_rows.push(point.iter().zip(mean).map(|(z, m)| z + m).collect());
            labels.push(c as u32);
        }
    }

    // Random orthonormal injection latent -> P dims.
    let g = DMatrix::from_fn(spec.p, d, |_, _| draw_normal(&mut rng));
    let qr = g.qr();
    let basis = qr.q();

    let rows: Vec<Vec<f64>> = latent_rows
        .iter()
        .map(|z| (0..spec.p).map(|i| (0..d).map(|j| basis[(i, j)] * z[j]).sum()).collect())
        .collect();
    let means: Vec<Vec<f64>> = latent_means
        .iter()
        .map(|z| (0..spec.p).map(|i| (0..d).map(|j| basis[(i, j)] * z[j]).sum()).collect())
        .collect();

    Ok(SynthDataset { rows, labels, means, spec: spec.clone() })
}

fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// n standard-normal draws in d dims, centered and decorrelated so the sample mean is
/// exactly zero and the sample covariance exactly `sigma^2 I`.
fn whitened_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, sigma: f64) -> Result<Vec<Vec<f64>>> {
    let mut z: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| draw_normal(rng)).collect()).collect();
    let mut mean = vec![0.0; d];
    for row in &z {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for row in &mut z {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in &z {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += row[a] * row[b];
            }
        }
    }
    cov /= n as f64;
    let chol = nalgebra::Cholesky::new(cov)
        .ok_or_else(|| Error::invalid("degenerate sample covariance while whitening"))?;
    let l = chol.l();
    Ok(z.into_iter()
        .map(|row| {
            let v = nalgebra::DVector::from_vec(row);
            let w = l.solve_lower_triangular(&v).expect("triangular solve");
            w.iter().map(|x| x * sigma).collect()
        })
        .collect())
}

/// Write rows as CSV with a `f0..f{P-1},label` header; the label is the last column.
pub fn write_synth_csv<W: std::io::Write>(ds: &SynthDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let p = ds.spec.p;
    let mut header: Vec<String> = (0..p).map(|i| format!("f{i}")).collect();
    header.push("label".to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (row, label) in ds.rows.iter().zip(&ds.labels) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        record.push(label.to_string());
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv write failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectral_norm_of_sample_cov(rows: &[&Vec<f64>]) -> f64 {
        let n = rows.len();
        let p = rows[0].len();
        let mut mean = vec![0.0; p];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for row in rows {
            for a in 0..p {
                for b in 0..p {
                    cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
                }
            }
        }
        cov /= n as f64;
        cov.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn default_spec_produces_850_points_with_exact_counts() {
        let ds = make_synthetic(&SynthSpec::default()).unwrap();
        assert_eq!(ds.rows.len(), 850);
        assert_eq!(ds.labels.len(), 850);
        assert_eq!(ds.rows[0].len(), 100);
        let mut counts = vec![0usize; 5];
        for &l in &ds.labels {
            counts[l as usize] += 1;
        }
        assert_eq!(counts, vec![250, 250, 250, 50, 50]);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = SynthSpec::default();
        let a = make_synthetic(&spec).unwrap();
        let b = make_synthetic(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.labels, b.labels);
        let c = make_synthetic(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn spectral_norm_ratio_hits_the_configured_gap() {
        for seed in [0, 3, 11] {
            let ds = make_synthetic(&SynthSpec { seed, ..SynthSpec::default() }).unwrap();
            let big: Vec<&Vec<f64>> =
                ds.rows.iter().zip(&ds.labels).filter(|(_, &l)| l == 0).map(|(r, _)| r).collect();
            let small: Vec<&Vec<f64>> =
                ds.rows.iter().zip(&ds.labels).filter(|(_, &l)| l == 3).map(|(r, _)| r).collect();
            let ratio = spectral_norm_of_sample_cov(&big) / spectral_norm_of_sample_cov(&small);
            assert!((7.0..=13.0).contains(&ratio), "seed {seed}: spectral-norm ratio {ratio}");
        }
    }

    #[test]
    fn cluster_sample_moments_are_exact() {
        // Whitening pins each cluster's sample mean and covariance exactly, up to the
        // orthonormal embedding (which preserves both).
        let spec = SynthSpec {
            k_big: 2,
            k_small: 1,
            n_big: 40,
            n_small: 30,
            d_latent: 5,
            p: 12,
            variance_ratio: 4.0,
            seed: 9,
        };
        let ds = make_synthetic(&spec).unwrap();
        let cluster: Vec<&Vec<f64>> =
            ds.rows.iter().zip(&ds.labels).filter(|(_, &l)| l == 2).map(|(r, _)| r).collect();
        assert_eq!(cluster.len(), 30);
        let p = spec.p;
        let mut mean = vec![0.0; p];
        for row in &cluster {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= 30.0;
        }
        for (a, b) in mean.iter().zip(&ds.means[2]) {
            assert!((a - b).abs() < 1e-9, "sample mean drifted: {a} vs {b}");
        }
        let norm = spectral_norm_of_sample_cov(&cluster);
        assert!((norm - 0.25).abs() < 1e-9, "small-cluster spectral norm {norm}");
    }

    #[test]
    fn cluster_means_keep_the_configured_geometry() {
        // Big means are equidistant at MEAN_SCALE * sqrt(2); each small mean sits
        // SMALL_OFFSET big-sigmas from its host. The orthonormal embedding preserves
        // both distances exactly.
        let ds = make_synthetic(&SynthSpec::default()).unwrap();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let want = MEAN_SCALE * 2.0_f64.sqrt();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d = dist(&ds.means[i], &ds.means[j]);
                assert!((d - want).abs() < 1e-9, "bigs {i},{j} sit {d}, want {want}");
            }
        }
        for t in 0..2 {
            let host = t % 3;
            let d = dist(&ds.means[3 + t], &ds.means[host]);
            assert!((d - SMALL_OFFSET).abs() < 1e-9, "small {t} sits {d} from host {host}");
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let base = SynthSpec::default();
        assert!(make_synthetic(&SynthSpec { d_latent: 101, ..base.clone() }).is_err());
        assert!(make_synthetic(&SynthSpec { n_small: 10, ..base.clone() }).is_err());
        assert!(make_synthetic(&SynthSpec { variance_ratio: 0.0, ..base.clone() }).is_err());
        assert!(make_synthetic(&SynthSpec { k_small: 0, ..base }).is_err());
    }

    #[test]
    fn csv_round_trip_carries_labels() {
        let spec = SynthSpec {
            k_big: 1,
            k_small: 1,
            n_big: 8,
            n_small: 7,
            d_latent: 3,
            p: 5,
            variance_ratio: 2.0,
            seed: 4,
        };
        let ds = make_synthetic(&spec).unwrap();
        let mut buf = Vec::new();
        write_synth_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "f0,f1,f2,f3,f4,label");
        assert_eq!(text.lines().count(), 16);
        let last = text.lines().last().unwrap();
        assert!(last.ends_with(",1"), "label column survives: {last}");
    }
}
