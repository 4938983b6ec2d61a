//! Result files: learning-curve CSVs, `diagnostics.json`, selection traces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{DiagnosticsReport, Experiment, FoldRun, LearningCurve, PcaReport};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub fn curve_file_name(curve: &LearningCurve) -> String {
    format!("curve_{}_{}.csv", curve.meta.approach, curve.meta.method)
}

pub fn trace_file_name(curve: &LearningCurve, run: &FoldRun) -> String {
    format!(
        "selection_trace_{}_{}_r{}_f{}.csv",
        curve.meta.approach, curve.meta.method, run.repeat, run.fold
    )
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_curve_csv(curve: &LearningCurve, path: &Path) -> Result<()> {
    let mut s = String::from("num_labels,mean_acc,std_acc,train_count,infer_count\n");
    for p in &curve.points {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.num_labels, p.mean_accuracy, p.std_accuracy, p.cost.train_count, p.cost.infer_count
        ));
    }
    write_file(path, &s)
}

/// Warm-start rows (order 0, ascending id) followed by the annotated ids in
/// selection order, with PCA coordinates and true class.
pub fn write_selection_trace(run: &FoldRun, pca: &PcaReport, dataset: &Dataset, path: &Path) -> Result<()> {
    let mut s = String::from("order,sample_id,pc1,pc2,class\n");
    let rows = run
        .warm_start_ids
        .iter()
        .map(|&id| (0, id))
        .chain(run.selected_ids.iter().enumerate().map(|(i, &id)| (i + 1, id)));
    for (order, id) in rows {
        let [pc1, pc2] = pca.coords[id];
        let class = dataset.label(id).map(|c| c.to_string()).unwrap_or_default();
        s.push_str(&format!("{order},{id},{pc1},{pc2},{class}\n"));
    }
    write_file(path, &s)
}

pub fn write_diagnostics(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let value = json!({
        "kmeans": {
            "k": report.kmeans.k,
            "agreement": report.kmeans.agreement,
            "assignment": report.kmeans.assignment,
        },
        "pca": {
            "explained_variance": report.pca.explained_variance,
            "coords": report.pca.coords,
        },
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    write_file(path, &text)
}

/// Writes every curve, `diagnostics.json`, and the selection trace of the
/// first (repeat 0, fold 0) run of each experiment. Returns the written paths.
pub fn emit_results(
    experiments: &[Experiment],
    diagnostics: &DiagnosticsReport,
    dataset: &Dataset,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for exp in experiments {
        let path = out_dir.join(curve_file_name(&exp.curve));
        write_curve_csv(&exp.curve, &path)?;
        written.push(path);
        if let Some(run) = exp.runs.first() {
            let path = out_dir.join(trace_file_name(&exp.curve, run));
            write_selection_trace(run, &diagnostics.pca, dataset, &path)?;
            written.push(path);
        }
    }
    let path = out_dir.join("diagnostics.json");
    write_diagnostics(diagnostics, &path)?;
    written.push(path);
    Ok(written)
}
