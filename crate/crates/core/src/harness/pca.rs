//! Two-component principal component projection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

const TOL: f64 = 1e-10;
const MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReport {
    /// Fractions of total variance captured by the two components.
    pub explained_variance: [f64; 2],
    /// Per-sample coordinates on the two components.
    pub coords: Vec<[f64; 2]>,
    pub components: [Vec<f64>; 2],
}

struct Centered {
    rows: Vec<f64>,
    n: usize,
    d: usize,
}

impl Centered {
    /// `Σ v` with `Σ = Xcᵀ Xc / (n − 1)`, never materialized.
    fn cov_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for row in self.rows.chunks_exact(self.d) {
            let proj: f64 = row.iter().zip(v).map(|(x, y)| x * y).sum();
            for (o, x) in out.iter_mut().zip(row) {
                *o += proj * x;
            }
        }
        let denom = (self.n - 1) as f64;
        out.iter_mut().for_each(|o| *o /= denom);
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
    }
}

/// Leading eigenvector of the covariance restricted to the complement of
/// `deflate`, and its Rayleigh quotient.
/// `total` is the covariance trace; residuals below `total · 1e-13` count as zero.
fn power_iteration(data: &Centered, deflate: &[Vec<f64>], start: &[f64], total: f64) -> (Vec<f64>, f64) {
    let deflated = |v: &[f64]| {
        let mut w = data.cov_mul(v);
        orthogonalize(&mut w, deflate);
        orthogonalize(&mut w, deflate);
        w
    };
    let mut v = start.to_vec();
    orthogonalize(&mut v, deflate);
    if normalize(&mut v) == 0.0 {
        return (vec![0.0; data.d], 0.0);
    }
    for _ in 0..MAX_ITER {
        let mut w = deflated(&v);
        if normalize(&mut w) <= total * 1e-13 {
            return (v, 0.0);
        }
        if dot(&w, &v) < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if delta < TOL {
            break;
        }
    }
    let lambda = dot(&v, &deflated(&v)).max(0.0);
    (v, lambda)
}

/// Projects mean-centered samples onto the top two covariance eigenvectors.
///
/// Each component is signed so its largest-magnitude loading is positive.
pub fn pca_project(dataset: &Dataset) -> Result<PcaReport> {
    let n = dataset.num_samples();
    let d = dataset.dim();
    if n < 3 || d < 2 {
        return Err(Error::config(format!(
            "PCA needs >= 3 samples and >= 2 features, got {n}×{d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for id in dataset.sample_ids() {
        mean.iter_mut().zip(dataset.row(id)).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let rows: Vec<f64> = dataset
        .sample_ids()
        .flat_map(|id| {
            dataset
                .row(id)
                .iter()
                .zip(&mean)
                .map(|(x, m)| x - m)
                .collect::<Vec<_>>()
        })
        .collect();
    let data = Centered { rows, n, d };
    let total: f64 = data.rows.iter().map(|x| x * x).sum::<f64>() / (n - 1) as f64;

    if total == 0.0 {
        return Ok(PcaReport {
            explained_variance: [0.0, 0.0],
            coords: vec![[0.0, 0.0]; n],
            components: [vec![0.0; d], vec![0.0; d]],
        });
    }

    let mut r = RngStream::new(0).derive("pca_start", 0).rng();
    let start: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut variances = [0.0; 2];
    for (c, var) in variances.iter_mut().enumerate() {
        let (mut v, lambda) = power_iteration(&data, &components, &start, total);
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        *var = lambda;
        components.push(v);
        debug_assert_eq!(components.len(), c + 1);
    }
    let coords = data
        .rows
        .chunks_exact(d)
        .map(|row| [dot(row, &components[0]), dot(row, &components[1])])
        .collect();
    let fractions = variances.map(|v| (v / total).clamp(0.0, 1.0));
    let [first, second] = <[Vec<f64>; 2]>::try_from(components).expect("two components");
    Ok(PcaReport {
        explained_variance: fractions,
        coords,
        components: [first, second],
    })
}
