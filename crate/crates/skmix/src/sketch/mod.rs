//! Sketching: keep only Q of P preconditioned coordinates per point.
//!
//! Every point draws its own index set, so across many points all P coordinates keep
//! getting observed even though no single point stores more than Q of them. Optionally
//! the first `q_shared` indices are drawn once and shared by every row, which lets
//! downstream consumers rely on a common coordinate block; the remaining `q - q_shared`
//! are resampled per row from the complement.
//!
//! All draws come from `ChaCha8Rng` seeded by `SketchSpec::seed`: the sign flip uses the
//! default stream (see [`crate::precondition`]), the shared index set uses stream
//! `u64::MAX`, and row `i` uses stream `i + 1`. Index sets are therefore reproducible
//! per row without any sequential RNG state, which is what makes one-pass streaming and
//! parallel sketching deterministic.

pub mod file;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::precondition::PreconditionOp;

/// Dimensions and seed of a sketching run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchSpec {
    /// Ambient (preconditioned) dimension.
    pub p: usize,
    /// Entries kept per row, `1 <= q <= p`.
    pub q: usize,
    /// Leading indices shared by all rows, `q_shared <= q`.
    pub q_shared: usize,
    /// Seed for the sign flip and all index draws.
    pub seed: u64,
}

impl SketchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("p must be >= 1"));
        }
        if self.p > u32::MAX as usize {
            return Err(Error::invalid("p must fit in u32"));
        }
        if self.q == 0 || self.q > self.p {
            return Err(Error::invalid(format!(
                "q must satisfy 1 <= q <= p (got q={}, p={})",
                self.q, self.p
            )));
        }
        if self.q_shared > self.q {
            return Err(Error::invalid(format!(
                "q_shared must be <= q (got q_shared={}, q={})",
                self.q_shared, self.q
            )));
        }
        Ok(())
    }
}

/// One sketched point: `values[j]` is the preconditioned coordinate `indices[j]`.
/// Indices are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSketch {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl RowSketch {
    pub fn q(&self) -> usize {
        self.indices.len()
    }
}

/// A fully sketched dataset plus everything needed to interpret it later:
/// the preconditioner (for densifying means back to the original basis) and
/// optional integer labels for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedDataset {
    pub spec: SketchSpec,
    pub precondition: PreconditionOp,
    pub shared_indices: Vec<u32>,
    pub rows: Vec<RowSketch>,
    pub labels: Option<Vec<u32>>,
}

impl SketchedDataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Zero-fill row `i` back to P dimensions (unsampled coordinates are 0).
    pub fn densify_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.p];
        let row = &self.rows[i];
        for (&idx, &val) in row.indices.iter().zip(&row.values) {
            out[idx as usize] = val;
        }
        out
    }

    /// Structural invariants: index sets sorted, in range, of size q; finite values;
    /// label count matching n when present.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.indices.len() != self.spec.q || row.values.len() != self.spec.q {
                return Err(Error::invalid(format!(
                    "row {i} does not hold q={} entries",
                    self.spec.q
                )));
            }
            for w in row.indices.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::invalid(format!("row {i} indices not strictly increasing")));
                }
            }
            if let Some(&last) = row.indices.last() {
                if last as usize >= self.spec.p {
                    return Err(Error::invalid(format!("row {i} index {last} out of range")));
                }
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} holds a non-finite value")));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.rows.len() {
                return Err(Error::invalid("label count does not match row count"));
            }
        }
        Ok(())
    }
}

/// Draw the indices shared by every row: a partial Fisher-Yates over `[0, p)`.
pub fn shared_index_set(spec: &SketchSpec) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(u64::MAX);
    let mut pool: Vec<u32> = (0..spec.p as u32).collect();
    partial_shuffle(&mut pool, spec.q_shared, &mut rng);
    let mut out = pool[..spec.q_shared].to_vec();
    out.sort_unstable();
    out
}

/// Draw row `row`'s full index set: the shared block plus `q - q_shared` indices
/// sampled uniformly without replacement from the complement of the shared set.
pub fn row_index_set(spec: &SketchSpec, shared: &[u32], row: u64) -> Vec<u32> {
    let take = spec.q - spec.q_shared;
    let mut out = Vec::with_capacity(spec.q);
    out.extend_from_slice(shared);
    if take > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(row + 1);
        // Complement of the shared set, ascending. `shared` is sorted, so a merge walk
        // avoids a per-element search.
        let mut pool: Vec<u32> = Vec::with_capacity(spec.p - spec.q_shared);
        let mut s = shared.iter().peekable();
        for idx in 0..spec.p as u32 {
            if s.peek() == Some(&&idx) {
                s.next();
            } else {
                pool.push(idx);
            }
        }
        partial_shuffle(&mut pool, take, &mut rng);
        out.extend_from_slice(&pool[..take]);
    }
    out.sort_unstable();
    out
}

fn partial_shuffle(pool: &mut [u32], take: usize, rng: &mut ChaCha8Rng) {
    for j in 0..take {
        let r = rng.random_range(j..pool.len());
        pool.swap(j, r);
    }
}

/// Precondition one raw vector and keep row `row`'s index set.
pub fn sketch_row(
    op: &PreconditionOp,
    spec: &SketchSpec,
    shared: &[u32],
    row: u64,
    x: &[f64],
) -> RowSketch {
    let y = op.apply(x);
    let indices = row_index_set(spec, shared, row);
    let values = indices.iter().map(|&idx| y[idx as usize]).collect();
    RowSketch { indices, values }
}

/// Sketch a stream of raw vectors in one pass. Each vector is preconditioned,
/// subsampled, and dropped before the next is read; peak memory is O(P) transient
/// state plus the O(N*Q) output.
pub fn sketch_dataset<I>(rows: I, spec: &SketchSpec) -> Result<SketchedDataset>
where
    I: IntoIterator<Item = Result<Vec<f64>>>,
{
    spec.validate()?;
    let op = PreconditionOp::new(spec.p, spec.seed)?;
    let shared = shared_index_set(spec);
    let iter = rows.into_iter();
    let mut out: Vec<RowSketch> = Vec::with_capacity(iter.size_hint().0);
    for (i, row) in iter.enumerate() {
        let x = row?;
        if x.len() != spec.p {
            return Err(Error::invalid(format!(
                "row {i} has {} features, expected p={}",
                x.len(),
                spec.p
            )));
        }
        out.push(sketch_row(&op, spec, &shared, i as u64, &x));
    }
    Ok(SketchedDataset {
        spec: *spec,
        precondition: op,
        shared_indices: shared,
        rows: out,
        labels: None,
    })
}

/// Convenience wrapper for in-memory matrices (tests, benchmarks, examples).
pub fn sketch_matrix(x: &[Vec<f64>], spec: &SketchSpec) -> Result<SketchedDataset> {
    sketch_dataset(x.iter().map(|row| Ok(row.clone())), spec)
}
