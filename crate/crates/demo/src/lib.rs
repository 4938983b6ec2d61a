//! Browser demo: project a synthetic dataset, spread labels over points drawn
//! on a canvas, and compare learning curves. Every export returns JSON.

use budgetlearn::datagen::{generate, Profile};
use budgetlearn::harness::{diagnose, run_cv_experiment, ExperimentOptions};
use budgetlearn::ssl::{build_graph, label_spread, GraphKind, SpreadParams};
use budgetlearn::{
    ApproachConfig, Dataset, LabeledSet, LogisticRegression, SslConfig, SslMethod, Strategy, UnlabeledPool,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(text)
}

#[derive(Serialize)]
struct Projection {
    profile: &'static str,
    samples: usize,
    dim: usize,
    classes: Vec<usize>,
    clusters: Vec<usize>,
    coords: Vec<[f64; 2]>,
    explained_variance: [f64; 2],
    agreement: f64,
}

pub fn project(profile: &str, seed: u64) -> Result<String> {
    let profile: Profile = profile.parse().map_err(text)?;
    let ds = generate(&profile.spec(seed)).map_err(text)?;
    let report = diagnose(&ds, None, seed).map_err(text)?;
    to_json(&Projection {
        profile: profile.name(),
        samples: ds.num_samples(),
        dim: ds.dim(),
        classes: ds.labels().iter().map(|l| l.unwrap_or(0)).collect(),
        clusters: report.kmeans.assignment,
        coords: report.pca.coords,
        explained_variance: report.pca.explained_variance,
        agreement: report.kmeans.agreement,
    })
}

#[derive(Serialize)]
struct Spread {
    labels: Vec<usize>,
    confidence: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// `xy` holds interleaved coordinates; `labels[i] < 0` marks an unlabeled point.
pub fn spread(xy: &[f64], labels: &[i32], sigma: f64, alpha: f64) -> Result<String> {
    if xy.len() != 2 * labels.len() {
        return Err(format!("{} coordinates for {} points", xy.len(), labels.len()));
    }
    let rows: Vec<Vec<f64>> = xy.chunks(2).map(<[f64]>::to_vec).collect();
    let truth: Vec<Option<usize>> = labels.iter().map(|&l| usize::try_from(l).ok()).collect();
    let num_classes = truth.iter().flatten().max().map_or(2, |m| (m + 1).max(2));
    let ds = Dataset::from_rows(&rows, truth.clone(), num_classes).map_err(text)?;
    let mut seeded = LabeledSet::new();
    let mut pool = Vec::new();
    for (id, l) in truth.iter().enumerate() {
        match l {
            Some(_) => {
                seeded.annotate(id, &ds).map_err(text)?;
            }
            None => pool.push(id),
        }
    }
    if seeded.is_empty() {
        return Err("label at least one point".into());
    }
    let ids: Vec<usize> = ds.sample_ids().collect();
    let params = SpreadParams {
        alpha,
        ..SpreadParams::default()
    };
    let mut out = Spread {
        labels: truth.iter().map(|l| l.unwrap_or(0)).collect(),
        confidence: vec![1.0; ids.len()],
        converged: true,
        iterations: 0,
    };
    if pool.is_empty() {
        return to_json(&out);
    }
    let graph = build_graph(&ids, &ds, GraphKind::RbfFull { sigma }).map_err(text)?;
    let result = label_spread(&seeded, &UnlabeledPool::new(pool), &ds, &graph, params).map_err(text)?;
    for (&id, (label, dist)) in &result.assignments {
        out.labels[id] = *label;
        out.confidence[id] = dist.confidence();
    }
    out.converged = result.converged;
    out.iterations = result.iterations;
    to_json(&out)
}

#[derive(Serialize)]
struct Curve {
    name: String,
    labels: Vec<usize>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Passive, entropy active learning and the entropy + RBF-spreading hybrid.
pub fn curves(
    profile: &str,
    seed: u64,
    warm_start: usize,
    final_count: usize,
    repeats: usize,
    sigma: f64,
) -> Result<String> {
    let profile: Profile = profile.parse().map_err(text)?;
    let ds = generate(&profile.spec(seed)).map_err(text)?;
    let ssl = SslConfig {
        sigma,
        ..SslConfig::ssl_preset(SslMethod::SpreadRbf)
    };
    let step = ((final_count - warm_start.min(final_count)) / 10).max(1);
    let configs = [
        ApproachConfig::passive(warm_start, final_count, step),
        ApproachConfig::active(Strategy::Entropy, warm_start, final_count, step),
        ApproachConfig::hybrid(Strategy::Entropy, ssl, warm_start, final_count, step),
    ];
    let clf = LogisticRegression::default();
    let options = ExperimentOptions { repeats, seed, jobs: 1 };
    let mut out = Vec::new();
    for cfg in &configs {
        let exp = run_cv_experiment(&clf, &ds, cfg, options).map_err(text)?;
        let p = &exp.curve.points;
        out.push(Curve {
            name: format!("{} ({})", exp.curve.meta.approach, exp.curve.meta.method),
            labels: p.iter().map(|p| p.num_labels).collect(),
            mean: p.iter().map(|p| p.mean_accuracy).collect(),
            std: p.iter().map(|p| p.std_accuracy).collect(),
        });
    }
    to_json(&out)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = projectProfile)]
pub fn project_profile(profile: &str, seed: u32) -> std::result::Result<String, JsError> {
    js(project(profile, seed.into()))
}

#[wasm_bindgen(js_name = spreadLabels)]
pub fn spread_labels(xy: &[f64], labels: &[i32], sigma: f64, alpha: f64) -> std::result::Result<String, JsError> {
    js(spread(xy, labels, sigma, alpha))
}

#[wasm_bindgen(js_name = learningCurves)]
pub fn learning_curves(
    profile: &str,
    seed: u32,
    warm_start: usize,
    final_count: usize,
    repeats: usize,
    sigma: f64,
) -> std::result::Result<String, JsError> {
    js(curves(profile, seed.into(), warm_start, final_count, repeats, sigma))
}
