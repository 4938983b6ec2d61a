//! Pool-based sampling strategies for choosing the next sample to annotate.
//!
//! Uncertainty strategies score each pool sample from the current model's
//! posterior. Expected-error strategies hypothetically label every candidate
//! with every class, refit, and measure how uncertain the refitted model is on
//! the rest of the pool, weighting each hypothesis by the current posterior.
//!
//! Ties resolve to the lowest sample id.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ClassDistribution, Classifier, CostCounters};
use crate::sets::{LabeledSet, Provenance, UnlabeledPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    LeastConfident,
    Entropy,
    ExpectedError,
    ExpectedLogloss,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::LeastConfident,
        Strategy::Entropy,
        Strategy::ExpectedError,
        Strategy::ExpectedLogloss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::LeastConfident => "least_confident",
            Strategy::Entropy => "entropy",
            Strategy::ExpectedError => "expected_error",
            Strategy::ExpectedLogloss => "expected_logloss",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config(format!("unknown strategy `{s}`")))
    }
}

/// Settings for the expected-error strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedErrorConfig {
    /// Gradient steps for each hypothetical refit, warm-started from the current model.
    pub retrain_budget: usize,
    /// Sum the error over the whole pool instead of the pool minus the candidate.
    pub include_candidate: bool,
}

impl Default for ExpectedErrorConfig {
    fn default() -> Self {
        ExpectedErrorConfig {
            retrain_budget: 20,
            include_candidate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected_id: usize,
    pub utility: f64,
    pub per_sample_utility: BTreeMap<usize, f64>,
}

/// A selection plus, for expected-error strategies, the refitted model for
/// each hypothetical label of the chosen sample (indexed by class).
#[derive(Debug, Clone)]
pub struct Selection<M> {
    pub result: SelectionResult,
    pub hypotheses: Option<Vec<M>>,
}

fn non_empty(pool: &UnlabeledPool) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::contract("cannot select from an empty pool"));
    }
    Ok(())
}

fn pick(utilities: BTreeMap<usize, f64>, maximize: bool) -> SelectionResult {
    let mut best: Option<(usize, f64)> = None;
    for (&id, &u) in &utilities {
        let better = match best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    u > b
                } else {
                    u < b
                }
            }
        };
        if better {
            best = Some((id, u));
        }
    }
    let (selected_id, utility) = best.expect("non-empty utilities");
    SelectionResult {
        selected_id,
        utility,
        per_sample_utility: utilities,
    }
}

/// Uniform draw from the pool (passive learning).
pub fn select_random(pool: &UnlabeledPool, rng: &mut impl Rng) -> Result<SelectionResult> {
    non_empty(pool)?;
    let selected_id = pool.ids()[rng.gen_range(0..pool.len())];
    Ok(SelectionResult {
        selected_id,
        utility: 0.0,
        per_sample_utility: pool.ids().iter().map(|&id| (id, 0.0)).collect(),
    })
}

fn select_by_posterior<C: Classifier>(
    classifier: &C,
    model: &C::Model,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    counters: &mut CostCounters,
    utility: impl Fn(&ClassDistribution) -> f64,
) -> Result<SelectionResult> {
    non_empty(pool)?;
    let dists = classifier.predict_proba(model, pool.ids(), dataset, counters)?;
    let utilities = pool.ids().iter().copied().zip(dists.iter().map(utility)).collect();
    Ok(pick(utilities, true))
}

/// Picks the sample whose top-class probability is lowest (utility `1 − max P`).
pub fn select_least_confident<C: Classifier>(
    classifier: &C,
    model: &C::Model,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    counters: &mut CostCounters,
) -> Result<SelectionResult> {
    select_by_posterior(classifier, model, pool, dataset, counters, |d| 1.0 - d.confidence())
}

/// Picks the sample with the highest posterior entropy (nats).
pub fn select_entropy<C: Classifier>(
    classifier: &C,
    model: &C::Model,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    counters: &mut CostCounters,
) -> Result<SelectionResult> {
    select_by_posterior(classifier, model, pool, dataset, counters, ClassDistribution::entropy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PoolError {
    Prediction,
    LogLoss,
}

fn expected_error<C: Classifier>(
    classifier: &C,
    model: &C::Model,
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    config: ExpectedErrorConfig,
    kind: PoolError,
    counters: &mut CostCounters,
) -> Result<Selection<C::Model>> {
    non_empty(pool)?;
    if labeled.is_empty() {
        return Err(Error::contract("expected-error selection needs a labeled set"));
    }
    if config.retrain_budget == 0 {
        return Err(Error::config("retrain_budget must be >= 1"));
    }
    // Hypothesis weights come from the current model, before any refit.
    let posteriors = classifier.predict_proba(model, pool.ids(), dataset, counters)?;

    type Scored<M> = (f64, Vec<M>, CostCounters);
    let scored: Vec<Scored<C::Model>> = pool
        .ids()
        .par_iter()
        .zip(posteriors.par_iter())
        .map(|(&candidate, posterior)| -> Result<Scored<C::Model>> {
            let mut local = CostCounters::default();
            let rest = if config.include_candidate {
                pool.ids().to_vec()
            } else {
                pool.without(candidate)
            };
            let mut utility = 0.0;
            let mut models = Vec::with_capacity(dataset.num_classes());
            for (class, &p) in posterior.probs().iter().enumerate() {
                let mut augmented = labeled.clone();
                augmented.insert(candidate, class, Provenance::Pseudo, 1.0)?;
                let refit = classifier.retrain(&augmented, dataset, model, config.retrain_budget, &mut local)?;
                let dists = classifier.predict_proba(&refit, &rest, dataset, &mut local)?;
                let pool_error: f64 = match kind {
                    PoolError::Prediction => dists.iter().map(|d| 1.0 - d.confidence()).sum(),
                    PoolError::LogLoss => dists.iter().map(ClassDistribution::entropy).sum(),
                };
                utility += p * pool_error;
                models.push(refit);
            }
            Ok((utility, models, local))
        })
        .collect::<Result<_>>()?;

    let mut utilities = BTreeMap::new();
    let mut models = Vec::with_capacity(scored.len());
    for (&id, (u, m, local)) in pool.ids().iter().zip(scored) {
        counters.merge(local);
        utilities.insert(id, u);
        models.push(m);
    }
    let result = pick(utilities, false);
    let pos = pool
        .ids()
        .binary_search(&result.selected_id)
        .expect("selected from pool");
    Ok(Selection {
        result,
        hypotheses: Some(models.swap_remove(pos)),
    })
}

/// Minimizes the posterior-weighted sum of `1 − max P⁺` over the remaining pool.
pub fn select_min_expected_prediction_error<C: Classifier>(
    classifier: &C,
    model: &C::Model,
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    config: ExpectedErrorConfig,
    counters: &mut CostCounters,
) -> Result<SelectionResult> {
    expected_error(
        classifier,
        model,
        labeled,
        pool,
        dataset,
        config,
        PoolError::Prediction,
        counters,
    )
    .map(|s| s.result)
}

/// Minimizes the posterior-weighted sum of refitted-model entropies over the remaining pool.
pub fn select_min_expected_logloss_error<C: Classifier>(
    classifier: &C,
    model: &C::Model,
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    config: ExpectedErrorConfig,
    counters: &mut CostCounters,
) -> Result<SelectionResult> {
    expected_error(
        classifier,
        model,
        labeled,
        pool,
        dataset,
        config,
        PoolError::LogLoss,
        counters,
    )
    .map(|s| s.result)
}

/// Dispatches on `strategy`, keeping the hypothesis refits of expected-error strategies.
#[allow(clippy::too_many_arguments)]
pub fn select<C: Classifier>(
    strategy: Strategy,
    classifier: &C,
    model: &C::Model,
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    config: ExpectedErrorConfig,
    rng: &mut impl Rng,
    counters: &mut CostCounters,
) -> Result<Selection<C::Model>> {
    let plain = |result| Selection {
        result,
        hypotheses: None,
    };
    match strategy {
        Strategy::Random => select_random(pool, rng).map(plain),
        Strategy::LeastConfident => select_least_confident(classifier, model, pool, dataset, counters).map(plain),
        Strategy::Entropy => select_entropy(classifier, model, pool, dataset, counters).map(plain),
        Strategy::ExpectedError => expected_error(
            classifier,
            model,
            labeled,
            pool,
            dataset,
            config,
            PoolError::Prediction,
            counters,
        ),
        Strategy::ExpectedLogloss => expected_error(
            classifier,
            model,
            labeled,
            pool,
            dataset,
            config,
            PoolError::LogLoss,
            counters,
        ),
    }
}
