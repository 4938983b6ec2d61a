//! Labeled sets and unlabeled pools.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Human,
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label: usize,
    pub provenance: Provenance,
    pub weight: f64,
}

/// Samples with a known (human) or assumed (pseudo) label, keyed by sample id.
///
/// Iteration order is ascending sample id, which fixes the summation order
/// during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    entries: BTreeMap<usize, LabelEntry>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sample with its ground-truth label from `dataset`.
    pub fn annotate(&mut self, id: usize, dataset: &Dataset) -> Result<usize> {
        let label = dataset.truth(id)?;
        self.insert(id, label, Provenance::Human, 1.0)?;
        Ok(label)
    }

    pub fn insert(&mut self, id: usize, label: usize, provenance: Provenance, weight: f64) -> Result<()> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::contract(format!("weight {weight} must be finite and >= 0")));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::contract(format!("sample {id} is already labeled")));
        }
        self.entries.insert(
            id,
            LabelEntry {
                label,
                provenance,
                weight,
            },
        );
        Ok(())
    }

    pub fn remove(&mut self, id: usize) -> Option<LabelEntry> {
        self.entries.remove(&id)
    }

    pub fn get(&self, id: usize) -> Option<&LabelEntry> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: usize) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LabelEntry)> + '_ {
        self.entries.iter().map(|(&id, e)| (id, e))
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn human_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.iter()
            .filter(|(_, e)| e.provenance == Provenance::Human)
            .map(|(id, _)| id)
    }

    pub fn human_count(&self) -> usize {
        self.human_ids().count()
    }

    /// Only the human-provenance entries.
    pub fn humans(&self) -> LabeledSet {
        LabeledSet {
            entries: self
                .entries
                .iter()
                .filter(|(_, e)| e.provenance == Provenance::Human)
                .map(|(&id, e)| (id, *e))
                .collect(),
        }
    }

    /// Per-class counts of human labels.
    pub fn human_class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for (_, e) in self.iter().filter(|(_, e)| e.provenance == Provenance::Human) {
            counts[e.label] += 1;
        }
        counts
    }

    /// Checks that every id exists in `dataset` and every human label is the ground truth.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        for (id, e) in self.iter() {
            if !dataset.contains(id) {
                return Err(Error::contract(format!("labeled id {id} not in dataset")));
            }
            if e.label >= dataset.num_classes() {
                return Err(Error::contract(format!(
                    "label {} of sample {id} out of range",
                    e.label
                )));
            }
            if e.provenance == Provenance::Human && dataset.label(id) != Some(e.label) {
                return Err(Error::contract(format!(
                    "human label of sample {id} differs from ground truth"
                )));
            }
        }
        Ok(())
    }
}

/// Unlabeled sample ids, kept in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlabeledPool {
    ids: Vec<usize>,
}

impl UnlabeledPool {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        UnlabeledPool { ids }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn take(&mut self, id: usize) -> Result<()> {
        match self.ids.binary_search(&id) {
            Ok(pos) => {
                self.ids.remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::contract(format!("sample {id} is not in the pool"))),
        }
    }

    /// The pool without one id; used for expected-error sums over the rest of the pool.
    pub fn without(&self, id: usize) -> Vec<usize> {
        self.ids.iter().copied().filter(|&x| x != id).collect()
    }
}

/// Moves `id` from the pool into the labeled set with its ground-truth label.
pub fn annotate_from_pool(
    labeled: &mut LabeledSet,
    pool: &mut UnlabeledPool,
    id: usize,
    dataset: &Dataset,
) -> Result<usize> {
    if labeled.contains(id) {
        return Err(Error::contract(format!("sample {id} was already annotated")));
    }
    pool.take(id)?;
    labeled.annotate(id, dataset)
}
