//! Dense datasets and the CSV interchange format.
//!
//! The CSV layout is a header of feature column names plus one `label`
//! column, followed by one row per sample. An empty label field marks an
//! unlabeled sample.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A dense feature matrix with optional integer labels.
///
/// Sample ids are row indices, so they are unique and contiguous by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("feature dimension must be at least 1"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::contract(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::contract("num_classes must be at least 2"));
        }
        if let Some((i, l)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&l| l >= num_classes).map(|l| (i, l)))
        {
            return Err(Error::contract(format!(
                "sample {i} has label {l} outside [0, {num_classes})"
            )));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            num_classes,
        })
    }

    /// Builds a dataset from per-row vectors; every row must share one length.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::contract("rows have differing dimensions"));
        }
        Self::new(rows.concat(), dim, labels, num_classes)
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample_ids(&self) -> std::ops::Range<usize> {
        0..self.num_samples()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.features[id * self.dim..(id + 1) * self.dim]
    }

    pub fn label(&self, id: usize) -> Option<usize> {
        self.labels[id]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.num_samples()
    }

    /// Ground-truth label, failing if the sample is unlabeled or unknown.
    pub fn truth(&self, id: usize) -> Result<usize> {
        if !self.contains(id) {
            return Err(Error::contract(format!("unknown sample id {id}")));
        }
        self.labels[id].ok_or_else(|| Error::contract(format!("sample {id} has no ground-truth label")))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for l in self.labels.iter().flatten() {
            counts[*l] += 1;
        }
        counts
    }

    /// Z-scores every feature using statistics of the `reference` rows only,
    /// then applies the transform to all rows. Zero-variance features pass
    /// through unchanged.
    pub fn standardized(&self, reference: &[usize]) -> Result<Dataset> {
        if reference.is_empty() {
            return Err(Error::contract("standardization needs at least one reference row"));
        }
        let n = reference.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for &id in reference {
            for (m, x) in mean.iter_mut().zip(self.row(id)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dim];
        for &id in reference {
            for ((v, x), m) in var.iter_mut().zip(self.row(id)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();

        let mut features = self.features.clone();
        for row in features.chunks_exact_mut(self.dim) {
            for ((x, m), s) in row.iter_mut().zip(&mean).zip(&std) {
                if *s > 0.0 {
                    *x = (*x - m) / s;
                }
            }
        }
        Ok(Dataset {
            features,
            dim: self.dim,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
        })
    }

    /// Same samples in a different row order; `order[i]` is the old id of new row `i`.
    pub fn permuted(&self, order: &[usize]) -> Result<Dataset> {
        let mut seen = vec![false; self.num_samples()];
        if order.len() != self.num_samples() {
            return Err(Error::contract("permutation length mismatch"));
        }
        for &o in order {
            if o >= seen.len() || std::mem::replace(&mut seen[o], true) {
                return Err(Error::contract("not a permutation"));
            }
        }
        let features = order.iter().flat_map(|&o| self.row(o).iter().copied()).collect();
        let labels = order.iter().map(|&o| self.labels[o]).collect();
        Dataset::new(features, self.dim, labels, self.num_classes)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            let header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
            writeln!(out, "{},label", header.join(","))?;
            let mut line = String::new();
            for id in self.sample_ids() {
                line.clear();
                for x in self.row(id) {
                    line.push_str(&format!("{x},"));
                }
                if let Some(l) = self.labels[id] {
                    line.push_str(&l.to_string());
                }
                writeln!(out, "{line}")?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Loads a dataset, inferring the class count as one plus the largest label
/// (at least 2).
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_csv_with_classes(path, None)
}

pub fn load_csv_with_classes(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, num_classes)
}

pub fn parse_csv<R: std::io::Read>(reader: R, num_classes: Option<usize>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let label_col = header.iter().position(|h| h == "label").ok_or(Error::Parse {
        line: 1,
        message: "header has no `label` column".into(),
    })?;
    let width = header.len();
    let dim = width - 1;
    if dim == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "header names no feature columns".into(),
        });
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut label_lines = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_col {
                if field.is_empty() {
                    labels.push(None);
                } else {
                    let l = field.parse::<usize>().map_err(|_| Error::Parse {
                        line,
                        message: format!("label `{field}` is not a non-negative integer"),
                    })?;
                    labels.push(Some(l));
                    label_lines.push((line, l));
                }
            } else {
                let x = field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{}` value `{field}` is not numeric", &header[j]),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column `{}` value `{field}` is not finite", &header[j]),
                    });
                }
                features.push(x);
            }
        }
    }

    let num_classes = match num_classes {
        Some(c) => {
            if let Some(&(line, label)) = label_lines.iter().find(|(_, l)| *l >= c) {
                return Err(Error::LabelRange {
                    line,
                    label,
                    num_classes: c,
                });
            }
            c
        }
        None => label_lines.iter().map(|(_, l)| l + 1).max().unwrap_or(0).max(2),
    };
    Dataset::new(features, dim, labels, num_classes)
}
