//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use budgetlearn::model::ClassDistribution;
use budgetlearn::ssl::AffinityGraph;
use budgetlearn::*;
use nalgebra::DMatrix;
use rand::Rng;

pub fn random_dataset(rng: &mut impl Rng, n: usize, dim: usize, num_classes: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let labels = (0..n).map(|_| Some(rng.gen_range(0..num_classes))).collect();
    Dataset::from_rows(&rows, labels, num_classes).unwrap()
}

pub fn random_params(rng: &mut impl Rng, num_classes: usize, dim: usize, scale: f64) -> ModelParams {
    let mut p = ModelParams::zeros(num_classes, dim);
    p.weights.iter_mut().for_each(|w| *w = rng.gen_range(-scale..scale));
    p.bias.iter_mut().for_each(|b| *b = rng.gen_range(-scale..scale));
    p
}

/// Softmax of `W x + b`, written out longhand.
pub fn posterior(p: &ModelParams, x: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(p.num_classes);
    for c in 0..p.num_classes {
        let mut s = p.bias[c];
        for j in 0..p.dim {
            s += p.weights[c * p.dim + j] * x[j];
        }
        z.push(s);
    }
    let m = z.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

pub fn least_confidence(p: &[f64]) -> f64 {
    1.0 - p.iter().cloned().fold(0.0, f64::max)
}

pub fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Ascending scan keeping the first strict improvement, so ties go to the lowest id.
pub fn arg_best(ids: &[usize], scores: &[f64], maximize: bool) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        let better = if maximize {
            scores[i] > scores[best]
        } else {
            scores[i] < scores[best]
        };
        if better {
            best = i;
        }
    }
    ids[best]
}

pub fn brute_uncertainty(p: &ModelParams, pool: &[usize], ds: &Dataset, entropy: bool) -> usize {
    let scores: Vec<f64> = pool
        .iter()
        .map(|&id| {
            let q = posterior(p, ds.row(id));
            if entropy {
                shannon(&q)
            } else {
                least_confidence(&q)
            }
        })
        .collect();
    arg_best(pool, &scores, true)
}

/// Enumerates every (candidate, class) hypothesis and refits from `model`.
pub fn brute_expected_error(
    clf: &LogisticRegression,
    model: &ModelParams,
    labeled: &LabeledSet,
    pool: &[usize],
    ds: &Dataset,
    budget: usize,
    logloss: bool,
) -> usize {
    let mut scores = Vec::new();
    for &x in pool {
        let weights = posterior(model, ds.row(x));
        let mut total = 0.0;
        for (y, w) in weights.iter().enumerate() {
            let mut aug = labeled.clone();
            aug.insert(x, y, Provenance::Pseudo, 1.0).unwrap();
            let (refit, _) = clf.fit(&aug, ds, Some(model), budget).unwrap();
            let mut err = 0.0;
            for &u in pool.iter().filter(|&&u| u != x) {
                let q = posterior(&refit, ds.row(u));
                err += if logloss { shannon(&q) } else { least_confidence(&q) };
            }
            total += w * err;
        }
        scores.push(total);
    }
    arg_best(pool, &scores, false)
}

pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> AffinityGraph {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                let v = rng.gen_range(0.05..1.0);
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
    }
    AffinityGraph::from_weights(ssl::GraphKind::RbfFull { sigma: 1.0 }, (0..n).collect(), w).unwrap()
}

/// `(1 − α)(I − αS)⁻¹ Y` by a dense LU solve.
pub fn spread_closed_form(g: &AffinityGraph, seeds: &[(usize, usize)], num_classes: usize, alpha: f64) -> DMatrix<f64> {
    let n = g.len();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g.weight(i, j)).sum()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| {
        if deg[i] > 0.0 && deg[j] > 0.0 {
            g.weight(i, j) / (deg[i] * deg[j]).sqrt()
        } else {
            0.0
        }
    });
    let mut y = DMatrix::zeros(n, num_classes);
    for &(v, c) in seeds {
        y[(v, c)] = 1.0;
    }
    let a = DMatrix::identity(n, n) - s * alpha;
    a.lu().solve(&y).unwrap() * (1.0 - alpha)
}

pub fn normalize_row(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter().map(|v| v / total).collect()
    } else {
        row.to_vec()
    }
}

/// Central-difference gradient of the training loss.
pub fn finite_difference(p: &ModelParams, labeled: &LabeledSet, ds: &Dataset, l2: f64, h: f64) -> Vec<f64> {
    let n = p.weights.len() + p.bias.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut plus = p.clone();
        let mut minus = p.clone();
        if k < p.weights.len() {
            plus.weights[k] += h;
            minus.weights[k] -= h;
        } else {
            plus.bias[k - p.weights.len()] += h;
            minus.bias[k - p.weights.len()] -= h;
        }
        let lp = model::training_loss(&plus, labeled, ds, l2).unwrap();
        let lm = model::training_loss(&minus, labeled, ds, l2).unwrap();
        out.push((lp - lm) / (2.0 * h));
    }
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Scripted counter scenario: `t` training samples, four classes, warm start of `b`.
pub fn counter_scenario(t: usize, b: usize) -> (Dataset, RunState) {
    let mut rng = RngStream::new(11).rng();
    let ds = random_dataset(&mut rng, t, 3, 4);
    let ids: Vec<usize> = ds.sample_ids().collect();
    let state = orchestrator::warm_start(&ids, &ds, b, &RngStream::new(12)).unwrap();
    (ds, state)
}

/// Classifier whose posteriors are one-hot on `id % num_classes`; training is free.
pub struct OneHot {
    pub num_classes: usize,
}

impl Classifier for OneHot {
    type Model = ();

    fn train(&self, labeled: &LabeledSet, _: &Dataset, _: Option<&()>, counters: &mut CostCounters) -> Result<()> {
        if labeled.is_empty() {
            return Err(Error::Contract("empty".into()));
        }
        counters.train_count += 1;
        Ok(())
    }

    fn retrain(&self, l: &LabeledSet, d: &Dataset, _: &(), _: usize, counters: &mut CostCounters) -> Result<()> {
        self.train(l, d, None, counters)
    }

    fn predict_proba(
        &self,
        _: &(),
        ids: &[usize],
        _: &Dataset,
        counters: &mut CostCounters,
    ) -> Result<Vec<ClassDistribution>> {
        counters.infer_count += ids.len() as u64;
        Ok(ids
            .iter()
            .map(|id| {
                let mut p = vec![0.0; self.num_classes];
                p[id % self.num_classes] = 1.0;
                ClassDistribution::new(p).unwrap()
            })
            .collect())
    }
}
