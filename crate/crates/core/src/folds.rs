//! Five-fold cross-validation splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const NUM_FOLDS: usize = 5;

/// Disjoint folds covering every sample; round `v` validates on fold `v`
/// and trains on the other four.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn num_rounds(&self) -> usize {
        self.folds.len()
    }

    pub fn validation_ids(&self, round: usize) -> &[usize] {
        &self.folds[round]
    }

    pub fn training_ids(&self, round: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(v, _)| *v != round)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Smallest training-set size over all rounds.
    pub fn min_training_size(&self) -> usize {
        let total: usize = self.folds.iter().map(Vec::len).sum();
        total - self.folds.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Training-set sizes for a dataset of `n` samples, without drawing folds.
pub fn min_training_size(n: usize) -> usize {
    n - n.div_ceil(NUM_FOLDS)
}

/// Shuffles samples into five near-equal folds, stratified by class.
///
/// Each class (and the group of unlabeled samples, if any) is shuffled and
/// dealt round-robin, continuing where the previous group stopped, so both
/// the fold sizes and the per-class counts per fold differ by at most one.
pub fn make_folds(dataset: &Dataset, rng: &RngStream) -> Result<FoldSplit> {
    let n = dataset.num_samples();
    if n < NUM_FOLDS {
        return Err(Error::config(format!(
            "{NUM_FOLDS}-fold cross-validation needs at least {NUM_FOLDS} samples, got {n}"
        )));
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes() + 1];
    for id in dataset.sample_ids() {
        let g = dataset.label(id).unwrap_or(dataset.num_classes());
        groups[g].push(id);
    }
    let mut r = rng.rng();
    let mut folds = vec![Vec::new(); NUM_FOLDS];
    let mut next = 0;
    for group in &mut groups {
        group.shuffle(&mut r);
        for &id in group.iter() {
            folds[next].push(id);
            next = (next + 1) % NUM_FOLDS;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldSplit { folds })
}
