//! K-means clusterability check: how well do unsupervised clusters line up
//! with the classes?

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansReport {
    pub k: usize,
    /// Fraction of labeled samples whose cluster maps to their class under
    /// the best one-to-one cluster→class matching.
    pub agreement: f64,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.iter().enumerate() {
        let d = sq_dist(row, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, then proportional to squared distance.
fn seed_centroids(dataset: &Dataset, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = dataset.num_samples();
    let mut centroids = vec![dataset.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(dataset.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(dataset.row(pick).to_vec());
        let last = centroids.last().expect("just pushed");
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(dataset.row(i), last));
        }
    }
    centroids
}

/// Lloyd iterations from one seeding; returns (assignment, inertia).
fn lloyd(dataset: &Dataset, mut centroids: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let n = dataset.num_samples();
    let d = dataset.dim();
    let k = centroids.len();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, a) in assignment.iter_mut().enumerate() {
            let (c, _) = nearest(dataset.row(i), &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(dataset.row(i)) {
                *s += x;
            }
        }
        // empty clusters keep their previous centre
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = (0..n).map(|i| sq_dist(dataset.row(i), &centroids[assignment[i]])).sum();
    (assignment, inertia)
}

/// Maximum-weight one-to-one matching between rows and columns of a
/// non-negative matrix; returns the total weight.
pub fn max_matching_weight(weights: &[Vec<usize>]) -> usize {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return 0;
    }
    let max = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Square cost matrix; padding cells cost `max` (weight 0).
    let cost = |i: usize, j: usize| -> i64 { max - if i < rows && j < cols { weights[i][j] as i64 } else { 0 } };
    // Hungarian algorithm with potentials, 1-indexed.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
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
            for j in 0..=n {
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
    (1..=n)
        .filter(|&j| p[j] >= 1 && p[j] <= rows && j <= cols)
        .map(|j| weights[p[j] - 1][j - 1])
        .sum()
}

/// Best-matching agreement between a clustering and the dataset labels.
pub fn cluster_class_agreement(assignment: &[usize], labels: &[Option<usize>], k: usize, num_classes: usize) -> f64 {
    let mut table = vec![vec![0usize; num_classes]; k];
    let mut labeled = 0;
    for (&a, l) in assignment.iter().zip(labels) {
        if let Some(l) = l {
            table[a][*l] += 1;
            labeled += 1;
        }
    }
    if labeled == 0 {
        return 0.0;
    }
    max_matching_weight(&table) as f64 / labeled as f64
}

/// Clusters `dataset` into `k` groups (best of [`RESTARTS`] seeded runs by
/// inertia) and scores agreement with the labels.
pub fn kmeans_diagnose(dataset: &Dataset, k: usize, rng: &RngStream) -> Result<KMeansReport> {
    if k < 2 {
        return Err(Error::config("k must be >= 2"));
    }
    if k > dataset.num_samples() {
        return Err(Error::config(format!(
            "k = {k} exceeds the {} samples",
            dataset.num_samples()
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..RESTARTS {
        let mut r = rng.derive("restart", restart as u64).rng();
        let (assignment, inertia) = lloyd(dataset, seed_centroids(dataset, k, &mut r));
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((assignment, inertia));
        }
    }
    let (assignment, inertia) = best.expect("at least one restart");
    let agreement = cluster_class_agreement(&assignment, dataset.labels(), k, dataset.num_classes());
    Ok(KMeansReport {
        k,
        agreement,
        assignment,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_blobs_agree_fully() {
        let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..5 {
                rows.push(centre.to_vec());
                labels.push(Some(c));
            }
        }
        let ds = Dataset::from_rows(&rows, labels, 4).unwrap();
        let r = kmeans_diagnose(&ds, 4, &RngStream::new(1)).unwrap();
        assert_eq!(r.agreement, 1.0);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn identical_samples_give_majority_frequency() {
        let rows = vec![vec![1.0, 1.0]; 10];
        let labels = (0..10).map(|i| Some(usize::from(i < 7))).collect();
        let ds = Dataset::from_rows(&rows, labels, 2).unwrap();
        let r = kmeans_diagnose(&ds, 2, &RngStream::new(1)).unwrap();
        assert!((r.agreement - 0.7).abs() < 1e-12);
    }

    #[test]
    fn k_bounds() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![Some(0), Some(1)], 2).unwrap();
        assert!(kmeans_diagnose(&ds, 3, &RngStream::new(0)).is_err());
        assert!(kmeans_diagnose(&ds, 1, &RngStream::new(0)).is_err());
    }

    #[test]
    fn rectangular_matching() {
        assert_eq!(max_matching_weight(&[vec![5, 6, 0], vec![4, 0, 0]]), 10);
        assert_eq!(max_matching_weight(&[vec![3], vec![7], vec![1]]), 7);
    }
}
