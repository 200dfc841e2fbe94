//! Random-orthonormal-system preconditioning: a seeded random sign flip followed by an
//! orthonormal DCT-II. The composition spreads each coordinate's energy across all P
//! output coordinates, so that a small random subset of entries of the transformed
//! vector still carries information about every input feature.
//!
//! The transform is strictly orthonormal (`H^T H = I`); no subsampling scale factor is
//! folded in here. Applying and inverting both run in O(P log P) via an FFT.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Orthonormal transform used after the sign flip.
///
/// Encoded as a single byte in the sketch file format, so variants must keep
/// their discriminants stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Orthonormal DCT-II (inverse is the orthonormal DCT-III).
    Dct = 0,
}

impl TransformKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TransformKind::Dct),
            _ => None,
        }
    }
}

/// The preconditioning operator `x -> H (d .* x)` where `d` is a seeded i.i.d.
/// uniform +/-1 vector and `H` the orthonormal DCT-II matrix.
///
/// Signs are drawn from `ChaCha8Rng::seed_from_u64(seed)` (one bool per
/// coordinate, in order), so a `(dim, seed)` pair reproduces the operator
/// exactly on any platform.
pub struct PreconditionOp {
    dim: usize,
    seed: u64,
    /// Entries are exactly +1.0 or -1.0.
    signs: Vec<f64>,
    transform: TransformKind,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    /// twiddles[k] = exp(-i pi k / (2 dim)), shared by the DCT-II and (conjugated) DCT-III.
    twiddles: Vec<Complex<f64>>,
}

impl PreconditionOp {
    /// Build the operator for `dim`-dimensional inputs with signs drawn from `seed`.
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signs: Vec<f64> =
            (0..dim).map(|_| if rng.random::<bool>() { -1.0 } else { 1.0 }).collect();
        Self::from_parts(dim, seed, signs, TransformKind::Dct)
    }

    /// Rebuild an operator from stored parts (used when loading a sketch file,
    /// where the sign vector is authoritative).
    pub fn from_parts(
        dim: usize,
        seed: u64,
        signs: Vec<f64>,
        transform: TransformKind,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("precondition dim must be >= 1"));
        }
        if signs.len() != dim {
            return Err(Error::invalid(format!(
                "sign vector length {} does not match dim {}",
                signs.len(),
                dim
            )));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::invalid("sign vector entries must be exactly +1 or -1"));
        }
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(dim);
        let fft_inv = planner.plan_fft_inverse(dim);
        let twiddles = (0..dim)
            .map(|k| {
                let theta = -std::f64::consts::PI * k as f64 / (2.0 * dim as f64);
                Complex::new(theta.cos(), theta.sin())
            })
            .collect();
        Ok(PreconditionOp { dim, seed, signs, transform, fft_fwd, fft_inv, twiddles })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn transform(&self) -> TransformKind {
        self.transform
    }

    /// `y = H (d .* x)`. Panics if `x.len() != dim`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "input length must match operator dim");
        let flipped: Vec<f64> = x.iter().zip(&self.signs).map(|(v, s)| v * s).collect();
        self.dct2_orthonormal(&flipped)
    }

    /// `x = d .* (H^T y)`: exact inverse of [`apply`](Self::apply).
    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.dim, "input length must match operator dim");
        let mut x = self.dct3_orthonormal(y);
        for (v, s) in x.iter_mut().zip(&self.signs) {
            *v *= s;
        }
        x
    }

    /// Orthonormal DCT-II via a size-P complex FFT: even-index inputs are laid out
    /// forward, odd-index inputs backward, and the FFT output is rotated by a
    /// quarter-sample twiddle. Coefficient k then needs only the real part.
    fn dct2_orthonormal(&self, x: &[f64]) -> Vec<f64> {
        let p = self.dim;
        let mut buf = vec![Complex::new(0.0, 0.0); p];
        for m in 0..p.div_ceil(2) {
            buf[m] = Complex::new(x[2 * m], 0.0);
        }
        for m in 0..p / 2 {
            buf[p - 1 - m] = Complex::new(x[2 * m + 1], 0.0);
        }
        self.fft_fwd.process(&mut buf);
        let s0 = (1.0 / p as f64).sqrt();
        let sk = (2.0 / p as f64).sqrt();
        (0..p)
            .map(|k| {
                let c = (buf[k] * self.twiddles[k]).re;
                c * if k == 0 { s0 } else { sk }
            })
            .collect()
    }

    /// Orthonormal DCT-III (the inverse of [`dct2_orthonormal`]): rebuild the
    /// half-sample-rotated spectrum from the real coefficients, inverse FFT, and
    /// undo the even/odd reordering.
    fn dct3_orthonormal(&self, y: &[f64]) -> Vec<f64> {
        let p = self.dim;
        let c: Vec<f64> = (0..p)
            .map(|k| y[k] * if k == 0 { (p as f64).sqrt() } else { (p as f64 / 2.0).sqrt() })
            .collect();
        let mut buf = vec![Complex::new(0.0, 0.0); p];
        buf[0] = Complex::new(c[0], 0.0);
        for k in 1..p {
            // conj(twiddles[k]) = exp(+i pi k / (2p))
            buf[k] = self.twiddles[k].conj() * Complex::new(c[k], -c[p - k]);
        }
        self.fft_inv.process(&mut buf);
        let scale = 1.0 / p as f64;
        let mut x = vec![0.0; p];
        for m in 0..p.div_ceil(2) {
            x[2 * m] = buf[m].re * scale;
        }
        for m in 0..p / 2 {
            x[2 * m + 1] = buf[p - 1 - m].re * scale;
        }
        x
    }
}

impl Clone for PreconditionOp {
    fn clone(&self) -> Self {
        PreconditionOp {
            dim: self.dim,
            seed: self.seed,
            signs: self.signs.clone(),
            transform: self.transform,
            fft_fwd: Arc::clone(&self.fft_fwd),
            fft_inv: Arc::clone(&self.fft_inv),
            twiddles: self.twiddles.clone(),
        }
    }
}

impl PartialEq for PreconditionOp {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.seed == other.seed
            && self.signs == other.signs
            && self.transform == other.transform
    }
}

impl std::fmt::Debug for PreconditionOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreconditionOp")
            .field("dim", &self.dim)
            .field("seed", &self.seed)
            .field("transform", &self.transform)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent oracle: the P x P orthonormal DCT-II matrix built straight from
    /// the definition h[k][n] = s_k cos(pi (2n+1) k / (2P)).
    fn dct2_matrix(p: usize) -> Vec<Vec<f64>> {
        (0..p)
            .map(|k| {
                let s = if k == 0 { (1.0 / p as f64).sqrt() } else { (2.0 / p as f64).sqrt() };
                (0..p)
                    .map(|n| {
                        s * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64
                            / (2.0 * p as f64))
                            .cos()
                    })
                    .collect()
            })
            .collect()
    }

    fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn matches_explicit_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [1usize, 2, 3, 4, 5, 7, 8, 16, 33, 64, 100] {
            let op = PreconditionOp::new(p, 99).unwrap();
            let h = dct2_matrix(p);
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let flipped: Vec<f64> = x.iter().zip(op.signs()).map(|(v, s)| v * s).collect();
            let want = matvec(&h, &flipped);
            let got = op.apply(&x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "P={p}: got {g}, oracle {w}");
            }
        }
    }

    #[test]
    fn basis_vector_maps_to_matrix_column() {
        let p = 4;
        let op = PreconditionOp::new(p, 3).unwrap();
        let h = dct2_matrix(p);
        let mut e0 = vec![0.0; p];
        e0[0] = 1.0;
        let got = op.apply(&e0);
        // H D e0 = signs[0] * (first column of H)
        for k in 0..p {
            assert!((got[k] - op.signs()[0] * h[k][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [1usize, 2, 7, 64, 784] {
            let op = PreconditionOp::new(p, 5).unwrap();
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let back = op.invert(&op.apply(&x));
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-10, "P={p} round trip error {}", (a - b).abs());
            }
        }
    }

    #[test]
    fn preserves_euclidean_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in [2usize, 5, 64, 301] {
            let op = PreconditionOp::new(p, 17).unwrap();
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = op.apply(&x);
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((nx - ny).abs() < 1e-10);
        }
    }

    #[test]
    fn spreads_spike_energy() {
        // A one-hot input must not stay concentrated: max |entry| of the output is
        // sqrt(2/P)-ish, far below the 0.9 line (median over 100 seeded trials).
        let p = 64;
        let mut maxima: Vec<f64> = (0..100u64)
            .map(|t| {
                let op = PreconditionOp::new(p, t).unwrap();
                let j = (t as usize * 31) % p;
                let mut e = vec![0.0; p];
                e[j] = 1.0;
                op.apply(&e).iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .collect();
        maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = maxima[50];
        assert!(median < 0.9, "median spike maximum {median} too concentrated");
    }

    #[test]
    fn seeded_signs_are_reproducible() {
        let a = PreconditionOp::new(6, 42).unwrap();
        let b = PreconditionOp::new(6, 42).unwrap();
        assert_eq!(a, b);
        let c = PreconditionOp::new(6, 43).unwrap();
        assert_ne!(a.signs(), c.signs());
        // Frozen fixture: the sign pattern ChaCha8 produces for seed 42 at dim 4.
        let frozen = PreconditionOp::new(4, 42).unwrap();
        assert_eq!(frozen.signs(), FROZEN_SIGNS_DIM4_SEED42);
    }

    // Captured once from ChaCha8Rng::seed_from_u64(42) (one bool per coordinate,
    // true => -1) and frozen; a change here means the seed derivation changed.
    const FROZEN_SIGNS_DIM4_SEED42: &[f64] = &[1.0, -1.0, 1.0, -1.0];

    #[test]
    fn rejects_zero_dim() {
        assert!(matches!(PreconditionOp::new(0, 1), Err(Error::InvalidArgument(_))));
    }
}
