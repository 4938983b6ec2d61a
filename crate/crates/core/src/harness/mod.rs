//! Cross-validated learning-curve experiments and dataset diagnostics.
//!
//! One experiment runs `repeats × 5` independent (repeat, fold) tasks. Each
//! task standardizes features with its training-fold statistics, draws the
//! warm-start labels, runs the configured loop and predicts its validation
//! fold at every grid point. Per repeat, the five folds' validation
//! predictions are pooled into one accuracy per grid point; the curve reports
//! mean and standard deviation of those accuracies over repeats.

mod emit;
mod kmeans;
mod pca;

pub use emit::{
    curve_file_name, emit_results, trace_file_name, write_curve_csv, write_diagnostics, write_selection_trace,
};
pub use kmeans::{cluster_class_agreement, kmeans_diagnose, max_matching_weight, KMeansReport, RESTARTS};
pub use pca::{pca_project, PcaReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::folds::{make_folds, min_training_size, NUM_FOLDS};
use crate::metrics::{accuracy, mean_std};
use crate::model::{Classifier, CostCounters};
use crate::orchestrator::{run_approach, warm_start, ApproachConfig, TraceStatus};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub num_labels: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Counters summed over every (repeat, fold) run.
    pub cost: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub approach: String,
    pub method: String,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub meta: CurveMeta,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn final_accuracy(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.mean_accuracy)
    }

    /// First label count whose mean accuracy reaches `target`.
    pub fn labels_to_reach(&self, target: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.mean_accuracy >= target)
            .map(|p| p.num_labels)
    }

    pub fn accuracy_at(&self, num_labels: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.num_labels == num_labels)
            .map(|p| p.mean_accuracy)
    }
}

/// What one (repeat, fold) task did, without its models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRun {
    pub repeat: usize,
    pub fold: usize,
    pub training_ids: Vec<usize>,
    pub validation_ids: Vec<usize>,
    pub warm_start_ids: Vec<usize>,
    pub selected_ids: Vec<usize>,
    pub label_counts: Vec<usize>,
    pub counters: Vec<CostCounters>,
    /// Validation predictions per grid point, aligned with `validation_ids`.
    pub predictions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub config: ApproachConfig,
    pub curve: LearningCurve,
    /// Ordered by (repeat, fold).
    pub runs: Vec<FoldRun>,
    /// Per repeat, the pooled accuracy at each grid point.
    pub repeat_accuracies: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentOptions {
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads for (repeat, fold) tasks; results do not depend on it.
    pub jobs: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            repeats: 10,
            seed: 0,
            jobs: 1,
        }
    }
}

/// Streams used by one task; shared with tests that replay a single run.
pub fn task_streams(seed: u64, repeat: usize, fold: usize) -> (RngStream, RngStream, RngStream) {
    let rep = RngStream::new(seed).derive("repeat", repeat as u64);
    let folds = rep.derive("folds", 0);
    let task = rep.derive("fold", fold as u64);
    (folds, task.derive("warm_start", 0), task.derive("run", 0))
}

fn run_task<C: Classifier>(
    classifier: &C,
    dataset: &Dataset,
    config: &ApproachConfig,
    seed: u64,
    repeat: usize,
    fold: usize,
) -> Result<FoldRun> {
    let (fold_stream, warm_stream, run_stream) = task_streams(seed, repeat, fold);
    let split = make_folds(dataset, &fold_stream)?;
    let training_ids = split.training_ids(fold);
    let validation_ids = split.validation_ids(fold).to_vec();
    let scaled = dataset.standardized(&training_ids)?;
    let state = warm_start(&training_ids, &scaled, config.warm_start, &warm_stream)?;
    let trace = run_approach(classifier, &state, &scaled, config, &run_stream)?;
    if let TraceStatus::PoolExhausted { at } = trace.status {
        return Err(Error::config(format!(
            "pool exhausted at {at} labels before F = {}",
            config.final_count
        )));
    }
    let mut scratch = CostCounters::default();
    let predictions = trace
        .points
        .iter()
        .map(|p| classifier.predict(&p.model, &validation_ids, &scaled, &mut scratch))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldRun {
        repeat,
        fold,
        training_ids,
        validation_ids,
        warm_start_ids: trace.warm_start_ids.clone(),
        selected_ids: trace.points.last().map(|p| p.selected_ids.clone()).unwrap_or_default(),
        label_counts: trace.points.iter().map(|p| p.num_human_labels).collect(),
        counters: trace.points.iter().map(|p| p.counters).collect(),
        predictions,
    })
}

/// Runs the full cross-validation protocol for one approach.
pub fn run_cv_experiment<C: Classifier>(
    classifier: &C,
    dataset: &Dataset,
    config: &ApproachConfig,
    options: ExperimentOptions,
) -> Result<Experiment> {
    if !dataset.is_fully_labeled() {
        return Err(Error::config(
            "experiments need a fully labeled dataset (labels act as the annotator)",
        ));
    }
    if options.repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    if options.jobs == 0 {
        return Err(Error::config("jobs must be >= 1"));
    }
    if dataset.num_samples() < NUM_FOLDS {
        return Err(Error::config(format!("need at least {NUM_FOLDS} samples")));
    }
    config.validate(min_training_size(dataset.num_samples()), dataset.num_classes())?;

    let tasks: Vec<(usize, usize)> = (0..options.repeats)
        .flat_map(|r| (0..NUM_FOLDS).map(move |v| (r, v)))
        .collect();
    let task = |&(r, v): &(usize, usize)| run_task(classifier, dataset, config, options.seed, r, v);
    // one job runs on the calling thread (no pool), which also works where threads cannot be spawned
    let runs: Vec<FoldRun> = if options.jobs == 1 {
        tasks.iter().map(task).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start {} workers: {e}", options.jobs)))?;
        pool.install(|| tasks.par_iter().map(task).collect::<Result<_>>())?
    };

    let grid = config.grid();
    let mut repeat_accuracies = Vec::with_capacity(options.repeats);
    for rep_runs in runs.chunks(NUM_FOLDS) {
        let mut accs = Vec::with_capacity(grid.len());
        for point in 0..grid.len() {
            let mut predicted = Vec::new();
            let mut truth = Vec::new();
            for run in rep_runs {
                predicted.extend_from_slice(&run.predictions[point]);
                truth.extend(
                    run.validation_ids
                        .iter()
                        .map(|&id| dataset.label(id).expect("fully labeled")),
                );
            }
            accs.push(accuracy(&predicted, &truth)?);
        }
        repeat_accuracies.push(accs);
    }

    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &num_labels)| {
            let accs: Vec<f64> = repeat_accuracies.iter().map(|a| a[i]).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&accs);
            let mut cost = CostCounters::default();
            runs.iter().for_each(|r| cost.merge(r.counters[i]));
            CurvePoint {
                num_labels,
                mean_accuracy,
                std_accuracy,
                cost,
            }
        })
        .collect();

    Ok(Experiment {
        config: config.clone(),
        curve: LearningCurve {
            meta: CurveMeta {
                approach: config.approach.name().to_owned(),
                method: config.method_label(),
                repeats: options.repeats,
                seed: options.seed,
            },
            points,
        },
        runs,
        repeat_accuracies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub kmeans: KMeansReport,
    pub pca: PcaReport,
}

/// k-means agreement (k defaults to the class count) plus a 2-D PCA projection.
pub fn diagnose(dataset: &Dataset, k: Option<usize>, seed: u64) -> Result<DiagnosticsReport> {
    let k = k.unwrap_or(dataset.num_classes());
    Ok(DiagnosticsReport {
        kmeans: kmeans_diagnose(dataset, k, &RngStream::new(seed).derive("kmeans", 0))?,
        pca: pca_project(dataset)?,
    })
}
