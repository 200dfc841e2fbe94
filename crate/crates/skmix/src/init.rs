//! Seeding for the EM loop: k-means++ on sketched rows (plain or greedy), then a hard
//! bootstrap assignment that gives the first M-step something to chew on.
//!
//! Distances between a sketched row and a candidate mean are always taken on the row's
//! own sampled coordinates, and candidate means are zero-filled densifications of
//! sketched rows — so seeding works without ever reconstructing dense data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmm::Responsibilities;
use crate::sketch::{RowSketch, SketchedDataset};

/// Squared distance between a sketched row and a dense mean, restricted to the row's
/// sampled coordinates.
pub fn sketched_dist2(row: &RowSketch, mean: &[f64]) -> f64 {
    row.indices
        .iter()
        .zip(&row.values)
        .map(|(&idx, &val)| {
            let d = val - mean[idx as usize];
            d * d
        })
        .sum()
}

/// k-means++ seeding on sketches. The first seed is uniform; each further seed is drawn
/// with probability proportional to the squared sketched distance to the nearest chosen
/// seed. Chosen rows are densified by zero-filling unsampled coordinates. If every
/// remaining row has distance zero (duplicate-heavy data), the lowest-index unchosen
/// row is taken.
pub fn kmeanspp_init(ds: &SketchedDataset, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    kmeanspp_init_with(ds, k, seed, 1)
}

/// Greedy k-means++: at each step, several candidate seeds are drawn from the same
/// distance-squared distribution and the one that lowers the total potential the most
/// is kept. Much less likely than plain k-means++ to burn a seed on an outlier, at the
/// cost of a few extra distance passes.
pub fn kmeanspp_init_greedy(ds: &SketchedDataset, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    kmeanspp_init_with(ds, k, seed, greedy_candidates(k))
}

/// Candidate draws per greedy seeding step; grows slowly with k.
pub(crate) fn greedy_candidates(k: usize) -> usize {
    2 + (k as f64).ln().floor() as usize
}

fn kmeanspp_init_with(
    ds: &SketchedDataset,
    k: usize,
    seed: u64,
    candidates: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = ds.n();
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
    let mut means = vec![ds.densify_row(first)];
    let mut d2: Vec<f64> = (0..n).map(|i| sketched_dist2(&ds.rows[i], &means[0])).collect();

    while means.len() < k {
        let total: f64 = d2.iter().sum();
        if total > 0.0 {
            // Draw each candidate by the d2 distribution and keep the one whose
            // adoption leaves the smallest total potential (first winner on ties).
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
                let mean = ds.densify_row(pick);
                let mut next_d2 = d2.clone();
                let mut potential = 0.0;
                for (i, slot) in next_d2.iter_mut().enumerate() {
                    let d = sketched_dist2(&ds.rows[i], &mean);
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
            means.push(ds.densify_row(pick));
        } else {
            let next =
                (0..n).find(|&i| !chosen[i]).expect("k <= n guarantees an unchosen row exists");
            chosen[next] = true;
            let mean = ds.densify_row(next);
            for (i, slot) in d2.iter_mut().enumerate() {
                let d = sketched_dist2(&ds.rows[i], &mean);
                if d < *slot {
                    *slot = d;
                }
            }
            means.push(mean);
        }
    }
    Ok(means)
}

/// Hard one-hot responsibilities: each row goes entirely to the seed mean nearest in
/// sketched distance, with ties broken toward the lowest component index.
pub fn bootstrap_responsibilities(ds: &SketchedDataset, means: &[Vec<f64>]) -> Responsibilities {
    let assignments: Vec<usize> = (0..ds.n())
        .map(|i| {
            let row = &ds.rows[i];
            let mut best = 0usize;
            let mut best_d = sketched_dist2(row, &means[0]);
            for (j, mean) in means.iter().enumerate().skip(1) {
                let d = sketched_dist2(row, mean);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    Responsibilities::one_hot(ds.n(), means.len(), &assignments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{sketch_matrix, SketchSpec};

    fn tiny_dataset(n: usize, p: usize, q: usize, seed: u64, data_seed: u64) -> SketchedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
        let spec = SketchSpec { p, q, q_shared: q / 2, seed };
        sketch_matrix(&rows, &spec).unwrap()
    }

    #[test]
    fn seeding_is_deterministic_and_well_formed() {
        let ds = tiny_dataset(12, 6, 3, 7, 99);
        let a = kmeanspp_init(&ds, 4, 5).unwrap();
        let b = kmeanspp_init(&ds, 4, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|m| m.len() == 6));
        let c = kmeanspp_init(&ds, 4, 6).unwrap();
        assert_ne!(a, c, "different seeds should explore different seedings");
    }

    #[test]
    fn seeds_are_zero_filled_rows() {
        let ds = tiny_dataset(10, 8, 3, 3, 11);
        let means = kmeanspp_init(&ds, 3, 0).unwrap();
        // Every seed must exactly equal the zero-filled densification of some row.
        let candidates: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.densify_row(i)).collect();
        for mean in &means {
            assert!(candidates.iter().any(|c| c == mean), "seed is not a densified data row");
        }
    }

    #[test]
    fn k_equals_n_selects_every_row_once() {
        let ds = tiny_dataset(6, 5, 5, 2, 21);
        let means = kmeanspp_init(&ds, 6, 13).unwrap();
        let mut sorted = means.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        assert_eq!(sorted.len(), 6, "all six rows must appear as seeds exactly once");
    }

    #[test]
    fn duplicate_rows_fall_back_to_index_order() {
        // All rows identical: after the first seed every distance is zero, so the
        // remaining seeds must be the lowest-index unchosen rows.
        let rows = vec![vec![1.0, 2.0, 3.0, 4.0]; 5];
        let spec = SketchSpec { p: 4, q: 4, q_shared: 0, seed: 1 };
        let ds = sketch_matrix(&rows, &spec).unwrap();
        let means = kmeanspp_init(&ds, 3, 42).unwrap();
        assert_eq!(means.len(), 3);
        for m in &means {
            assert_eq!(m, &ds.densify_row(0), "duplicates densify identically");
        }
    }

    #[test]
    fn second_seed_matches_d2_distribution() {
        // 3 rows, full sampling, engineered distances. Row layout (P=Q=2):
        //   row0 = (0,0), row1 = (3,0), row2 = (0,1).
        // Conditioned on row0 being the first seed, the second seed must be row1 with
        // probability 9/10 and row2 with probability 1/10. Monte Carlo over seeds and
        // a 3-sigma binomial band around each frequency.
        let rows = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 1.0]];
        let spec = SketchSpec { p: 2, q: 2, q_shared: 2, seed: 9 };
        let ds = sketch_matrix(&rows, &spec).unwrap();
        let base: Vec<Vec<f64>> = (0..3).map(|i| ds.densify_row(i)).collect();

        let trials = 40_000;
        let mut first0 = 0usize;
        let mut second1 = 0usize;
        for seed in 0..trials {
            let means = kmeanspp_init(&ds, 2, seed as u64).unwrap();
            if means[0] == base[0] {
                first0 += 1;
                if means[1] == base[1] {
                    second1 += 1;
                }
            }
        }
        // First seed uniform over 3 rows.
        let f0 = first0 as f64 / trials as f64;
        let se0 = ((1.0 / 3.0) * (2.0 / 3.0) / trials as f64).sqrt();
        assert!((f0 - 1.0 / 3.0).abs() < 3.0 * se0, "first-seed frequency {f0}");
        // Second seed given first = row0: d2 = [0, 9, 1] so P(row1) = 0.9.
        let f1 = second1 as f64 / first0 as f64;
        let se1 = (0.9 * 0.1 / first0 as f64).sqrt();
        assert!((f1 - 0.9).abs() < 3.0 * se1, "second-seed frequency {f1}");
    }

    #[test]
    fn greedy_seeding_lowers_the_potential_on_average() {
        // Two tight blobs plus one far outlier: plain k-means++ often burns the second
        // seed on the outlier, greedy should not. Compare mean final potentials.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for c in 0..2 {
            for _ in 0..20 {
                let center = c as f64 * 10.0;
                rows.push((0..4).map(|_| center + rng.random::<f64>()).collect());
            }
        }
        rows.push(vec![500.0, 500.0, 500.0, 500.0]);
        let spec = SketchSpec { p: 4, q: 4, q_shared: 0, seed: 5 };
        let ds = sketch_matrix(&rows, &spec).unwrap();

        let potential = |means: &[Vec<f64>]| -> f64 {
            (0..ds.n())
                .map(|i| {
                    means
                        .iter()
                        .map(|m| sketched_dist2(&ds.rows[i], m))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum()
        };
        let mut plain = 0.0;
        let mut greedy = 0.0;
        for seed in 0..200u64 {
            plain += potential(&kmeanspp_init(&ds, 2, seed).unwrap());
            greedy += potential(&kmeanspp_init_greedy(&ds, 2, seed).unwrap());
        }
        assert!(greedy < plain, "greedy mean potential {greedy} should beat plain {plain}");
        // Determinism and shape, same as the plain path.
        let a = kmeanspp_init_greedy(&ds, 3, 9).unwrap();
        let b = kmeanspp_init_greedy(&ds, 3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn bootstrap_assigns_by_sketched_distance_with_low_index_ties() {
        // Hand-built sketches (no preconditioning in the way) so distances are exactly
        // the written numbers. Row 2 is equidistant: the tie goes to component 0.
        let spec = SketchSpec { p: 2, q: 2, q_shared: 2, seed: 4 };
        let values = [[0.0, 0.0], [10.0, 0.0], [5.0, 0.0], [9.0, 0.5]];
        let ds = SketchedDataset {
            spec,
            precondition: crate::precondition::PreconditionOp::new(2, 0).unwrap(),
            shared_indices: vec![0, 1],
            rows: values
                .iter()
                .map(|v| RowSketch { indices: vec![0, 1], values: v.to_vec() })
                .collect(),
            labels: None,
        };
        let means = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        let r = bootstrap_responsibilities(&ds, &means);
        r.validate_row_stochastic(0.0).unwrap();
        assert_eq!(r.hard_labels(), vec![0, 1, 0, 1]);
        assert_eq!(r.get(2, 0), 1.0);
        assert_eq!(r.get(2, 1), 0.0);
    }

    #[test]
    fn unsampled_coordinates_do_not_affect_seeding_distances() {
        // Build rows where only sampled coordinates are compared: two means that agree
        // on every sampled index of a row but differ wildly elsewhere must tie, and the
        // tie must go to the lower index.
        let rows = vec![vec![1.0, -1.0, 2.0, 0.5]];
        let spec = SketchSpec { p: 4, q: 2, q_shared: 2, seed: 8 };
        let ds = sketch_matrix(&rows, &spec).unwrap();
        let row = &ds.rows[0];
        let mut mean_a = vec![0.0; 4];
        let mut mean_b = vec![1000.0; 4];
        for (&idx, &val) in row.indices.iter().zip(&row.values) {
            mean_a[idx as usize] = val;
            mean_b[idx as usize] = val;
        }
        assert_eq!(sketched_dist2(row, &mean_a), 0.0);
        assert_eq!(sketched_dist2(row, &mean_b), 0.0);
        let r = bootstrap_responsibilities(&ds, &[mean_a, mean_b]);
        assert_eq!(r.hard_labels(), vec![0]);
    }
}
