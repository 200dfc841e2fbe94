//! Clustering accuracy under the best injective matching of predicted clusters to true
//! labels: build the contingency table, solve the assignment problem on it, and report
//! the matched fraction. Invariant under relabeling of either side.

use serde::Serialize;

use crate::error::{Error, Result};

/// The matched-accuracy verdict plus the evidence behind it.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyReport {
    /// Matched points / N under `matching`.
    pub accuracy: f64,
    /// `contingency[c][l]` = number of points in predicted cluster `c` with true label `l`.
    pub contingency: Vec<Vec<usize>>,
    /// For each predicted cluster, the true label it was matched to (None when there
    /// are more clusters than labels and this cluster went unmatched).
    pub matching: Vec<Option<usize>>,
}

/// Compute matched clustering accuracy. Labels on both sides are arbitrary
/// non-negative ids; the table is sized by the largest id seen.
pub fn cluster_accuracy(pred: &[u32], truth: &[u32]) -> Result<AccuracyReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "predicted labels ({}) and true labels ({}) differ in length",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("cannot score an empty labeling"));
    }
    let n_clusters = *pred.iter().max().unwrap() as usize + 1;
    let n_labels = *truth.iter().max().unwrap() as usize + 1;
    let mut contingency = vec![vec![0usize; n_labels]; n_clusters];
    for (&c, &l) in pred.iter().zip(truth) {
        contingency[c as usize][l as usize] += 1;
    }
    let assignment = max_assignment(&contingency);
    let mut matched = 0usize;
    let mut matching = vec![None; n_clusters];
    for (c, &l) in assignment.iter().enumerate() {
        if let Some(l) = l {
            matched += contingency[c][l];
            matching[c] = Some(l);
        }
    }
    Ok(AccuracyReport { accuracy: matched as f64 / pred.len() as f64, contingency, matching })
}

/// Maximum-weight injective assignment of rows to columns of a count matrix, via the
/// O(s^3) potentials form of the Hungarian algorithm on negated counts (the matrix is
/// padded square with zero counts, which never changes the optimum).
pub fn max_assignment(counts: &[Vec<usize>]) -> Vec<Option<usize>> {
    let rows = counts.len();
    let cols = counts.first().map_or(0, |r| r.len());
    let s = rows.max(cols);
    if s == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            -(counts[i][j] as i64)
        } else {
            0
        }
    };
    let inf = i64::MAX / 4;
    // 1-indexed potentials; p[j] = row matched to column j.
    let mut u = vec![0i64; s + 1];
    let mut v = vec![0i64; s + 1];
    let mut p = vec![0usize; s + 1];
    let mut way = vec![0usize; s + 1];
    for i in 1..=s {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; s + 1];
        let mut used = vec![false; s + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=s {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=s {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    for (j, &i) in p.iter().enumerate().skip(1).take(s) {
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}
