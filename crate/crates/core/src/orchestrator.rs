//! The four annotation loops: passive, active, semi-supervised and hybrid.
//!
//! Every loop starts from a warm-start state of `B` randomly annotated
//! samples and adds one human label per step until `F` labels are reached,
//! recording the model at the evaluation grid `B, B + step, …, F`.
//!
//! Counter accounting: the fit on the warm-start labels is not counted, so a
//! passive run reports exactly `F − B` training events.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Classifier, CostCounters};
use crate::rng::RngStream;
use crate::sets::{annotate_from_pool, LabeledSet, UnlabeledPool};
use crate::ssl::{PseudoLabeler, SslConfig};
use crate::strategies::{select, select_random, ExpectedErrorConfig, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Passive,
    Active,
    Ssl,
    Hybrid,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::Passive, Approach::Active, Approach::Ssl, Approach::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Passive => "passive",
            Approach::Active => "active",
            Approach::Ssl => "ssl",
            Approach::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Approach::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown approach `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachConfig {
    pub approach: Approach,
    pub strategy: Option<Strategy>,
    pub ssl: Option<SslConfig>,
    /// `B`: human labels drawn at random before the loop starts.
    pub warm_start: usize,
    /// `F`: human labels at the end of the loop.
    pub final_count: usize,
    pub grid_step: usize,
    pub expected_error: ExpectedErrorConfig,
}

impl ApproachConfig {
    pub fn passive(warm_start: usize, final_count: usize, grid_step: usize) -> Self {
        ApproachConfig {
            approach: Approach::Passive,
            strategy: None,
            ssl: None,
            warm_start,
            final_count,
            grid_step,
            expected_error: ExpectedErrorConfig::default(),
        }
    }

    pub fn active(strategy: Strategy, warm_start: usize, final_count: usize, grid_step: usize) -> Self {
        ApproachConfig {
            approach: Approach::Active,
            strategy: Some(strategy),
            ..Self::passive(warm_start, final_count, grid_step)
        }
    }

    pub fn ssl(ssl: SslConfig, warm_start: usize, final_count: usize, grid_step: usize) -> Self {
        ApproachConfig {
            approach: Approach::Ssl,
            ssl: Some(ssl),
            ..Self::passive(warm_start, final_count, grid_step)
        }
    }

    pub fn hybrid(strategy: Strategy, ssl: SslConfig, warm_start: usize, final_count: usize, grid_step: usize) -> Self {
        ApproachConfig {
            approach: Approach::Hybrid,
            strategy: Some(strategy),
            ssl: Some(ssl),
            ..Self::passive(warm_start, final_count, grid_step)
        }
    }

    /// Strategy or method label used in result file names, e.g. `entropy` or `entropy+spread_rbf`.
    pub fn method_label(&self) -> String {
        match (self.approach, self.strategy, self.ssl) {
            (Approach::Passive, _, _) => "random".to_owned(),
            (Approach::Active, Some(s), _) => s.name().to_owned(),
            (Approach::Ssl, _, Some(m)) => m.method.name().to_owned(),
            (Approach::Hybrid, Some(s), Some(m)) => format!("{}+{}", s.name(), m.method.name()),
            _ => "unconfigured".to_owned(),
        }
    }

    /// Checks that the loop itself is well formed (independent of any dataset).
    pub fn validate_loop(&self) -> Result<()> {
        if self.grid_step == 0 {
            return Err(Error::config("grid_step must be >= 1"));
        }
        if self.warm_start == 0 {
            return Err(Error::config("warm_start must be >= 1"));
        }
        if self.final_count < self.warm_start {
            return Err(Error::config(format!(
                "final_count F = {} is below warm_start B = {}",
                self.final_count, self.warm_start
            )));
        }
        let needs_strategy = matches!(self.approach, Approach::Active | Approach::Hybrid);
        let needs_ssl = matches!(self.approach, Approach::Ssl | Approach::Hybrid);
        if needs_strategy && self.strategy.is_none() {
            return Err(Error::config(format!(
                "approach `{}` requires a strategy",
                self.approach
            )));
        }
        if needs_ssl {
            match &self.ssl {
                None => {
                    return Err(Error::config(format!(
                        "approach `{}` requires an ssl method",
                        self.approach
                    )))
                }
                Some(s) => s.validate()?,
            }
        }
        if self.expected_error.retrain_budget == 0 {
            return Err(Error::config("retrain_budget must be >= 1"));
        }
        Ok(())
    }

    /// Full validation against a training-fold size `T` and class count `C`.
    pub fn validate(&self, training_size: usize, num_classes: usize) -> Result<()> {
        self.validate_loop()?;
        if self.warm_start < num_classes {
            return Err(Error::config(format!(
                "warm_start B = {} must be at least the number of classes C = {num_classes}",
                self.warm_start
            )));
        }
        if self.final_count > training_size {
            return Err(Error::config(format!(
                "final_count F = {} exceeds the training-fold size T = {training_size}",
                self.final_count
            )));
        }
        Ok(())
    }

    /// Human-label counts at which the model is recorded.
    pub fn grid(&self) -> Vec<usize> {
        let mut g: Vec<usize> = (self.warm_start..=self.final_count)
            .step_by(self.grid_step.max(1))
            .collect();
        if g.last() != Some(&self.final_count) {
            g.push(self.final_count);
        }
        g
    }

    fn on_grid(&self, count: usize) -> bool {
        count == self.final_count
            || (count >= self.warm_start && (count - self.warm_start).is_multiple_of(self.grid_step))
    }
}

/// Labeled set and pool for one run inside one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub labeled: LabeledSet,
    pub pool: UnlabeledPool,
}

/// Draws `B` training ids uniformly without replacement and annotates them.
pub fn warm_start(training_ids: &[usize], dataset: &Dataset, count: usize, rng: &RngStream) -> Result<RunState> {
    if count > training_ids.len() {
        return Err(Error::config(format!(
            "warm_start B = {count} exceeds the {} training ids",
            training_ids.len()
        )));
    }
    let mut ids = training_ids.to_vec();
    ids.sort_unstable();
    let mut r = rng.rng();
    let chosen: Vec<usize> = ids.choose_multiple(&mut r, count).copied().collect();
    let mut labeled = LabeledSet::new();
    for &id in &chosen {
        labeled.annotate(id, dataset)?;
    }
    let pool = UnlabeledPool::new(ids.into_iter().filter(|id| !labeled.contains(*id)).collect());
    Ok(RunState { labeled, pool })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<M> {
    pub num_human_labels: usize,
    pub model: M,
    pub counters: CostCounters,
    /// Ids annotated by the loop so far, in order (warm-start ids excluded).
    pub selected_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Complete,
    /// The pool ran out before `F` labels were reached.
    PoolExhausted {
        at: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<M> {
    pub warm_start_ids: Vec<usize>,
    pub points: Vec<TracePoint<M>>,
    pub status: TraceStatus,
}

impl<M> RunTrace<M> {
    pub fn final_counters(&self) -> CostCounters {
        self.points.last().map(|p| p.counters).unwrap_or_default()
    }
}

struct Recorder<'c, M> {
    config: &'c ApproachConfig,
    trace: RunTrace<M>,
    selected: Vec<usize>,
}

impl<'c, M: Clone> Recorder<'c, M> {
    fn new(config: &'c ApproachConfig, state: &RunState) -> Self {
        Recorder {
            config,
            trace: RunTrace {
                warm_start_ids: state.labeled.human_ids().collect(),
                points: Vec::new(),
                status: TraceStatus::Complete,
            },
            selected: Vec::new(),
        }
    }

    fn select(&mut self, id: usize) {
        self.selected.push(id);
    }

    fn record(&mut self, labeled: &LabeledSet, model: &M, counters: CostCounters) {
        let n = labeled.human_count();
        if self.config.on_grid(n) {
            self.trace.points.push(TracePoint {
                num_human_labels: n,
                model: model.clone(),
                counters,
                selected_ids: self.selected.clone(),
            });
        }
    }

    fn exhausted(&mut self, at: usize) {
        self.trace.status = TraceStatus::PoolExhausted { at };
    }
}

fn check_state(state: &RunState, dataset: &Dataset, config: &ApproachConfig, approach: Approach) -> Result<()> {
    config.validate_loop()?;
    if config.approach != approach {
        return Err(Error::config(format!(
            "config is for `{}`, not `{approach}`",
            config.approach
        )));
    }
    state.labeled.validate(dataset)?;
    if state.labeled.human_count() != config.warm_start {
        return Err(Error::contract(format!(
            "state holds {} human labels but B = {}",
            state.labeled.human_count(),
            config.warm_start
        )));
    }
    if state.pool.ids().iter().any(|&id| state.labeled.contains(id)) {
        return Err(Error::contract("pool and labeled set overlap"));
    }
    Ok(())
}

/// Passive learning: annotate random pool samples, refit on human labels.
pub fn run_passive<C: Classifier>(
    classifier: &C,
    state: &RunState,
    dataset: &Dataset,
    config: &ApproachConfig,
    rng: &RngStream,
) -> Result<RunTrace<C::Model>> {
    check_state(state, dataset, config, Approach::Passive)?;
    let RunState { mut labeled, mut pool } = state.clone();
    let mut rec = Recorder::new(config, state);
    let mut counters = CostCounters::default();
    let mut r = rng.rng();

    let mut model = classifier.train(&labeled, dataset, None, &mut CostCounters::default())?;
    rec.record(&labeled, &model, counters);
    for step in config.warm_start..config.final_count {
        if pool.is_empty() {
            rec.exhausted(step);
            break;
        }
        let id = select_random(&pool, &mut r)?.selected_id;
        annotate_from_pool(&mut labeled, &mut pool, id, dataset)?;
        rec.select(id);
        model = classifier.train(&labeled, dataset, None, &mut counters)?;
        rec.record(&labeled, &model, counters);
    }
    Ok(rec.trace)
}

/// Active learning: refit on human labels, let the strategy pick the next
/// sample, annotate it with its ground truth.
///
/// Expected-error strategies already refit the model for every hypothetical
/// label of the chosen sample; the refit for the revealed label becomes the
/// next model, so those runs report only the hypothesis refits as training.
pub fn run_active<C: Classifier>(
    classifier: &C,
    state: &RunState,
    dataset: &Dataset,
    config: &ApproachConfig,
    rng: &RngStream,
) -> Result<RunTrace<C::Model>> {
    check_state(state, dataset, config, Approach::Active)?;
    let strategy = config.strategy.expect("validated");
    let RunState { mut labeled, mut pool } = state.clone();
    let mut rec = Recorder::new(config, state);
    let mut counters = CostCounters::default();
    let mut r = rng.rng();

    let mut model = classifier.train(&labeled, dataset, None, &mut CostCounters::default())?;
    rec.record(&labeled, &model, counters);
    for step in config.warm_start..config.final_count {
        if pool.is_empty() {
            rec.exhausted(step);
            break;
        }
        let selection = select(
            strategy,
            classifier,
            &model,
            &labeled,
            &pool,
            dataset,
            config.expected_error,
            &mut r,
            &mut counters,
        )?;
        let id = selection.result.selected_id;
        let label = annotate_from_pool(&mut labeled, &mut pool, id, dataset)?;
        rec.select(id);
        model = match selection.hypotheses {
            Some(mut fits) => fits.swap_remove(label),
            None => classifier.train(&labeled, dataset, None, &mut counters)?,
        };
        rec.record(&labeled, &model, counters);
    }
    Ok(rec.trace)
}

/// Semi-supervised learning: random annotation; at each grid point the pool is
/// pseudo-labeled afresh and the model is fit on human plus pseudo labels.
pub fn run_ssl<C: Classifier>(
    classifier: &C,
    state: &RunState,
    dataset: &Dataset,
    config: &ApproachConfig,
    rng: &RngStream,
) -> Result<RunTrace<C::Model>> {
    check_state(state, dataset, config, Approach::Ssl)?;
    let mut labeler = PseudoLabeler::new(config.ssl.expect("validated"))?;
    let RunState { mut labeled, mut pool } = state.clone();
    let mut rec = Recorder::new(config, state);
    let mut counters = CostCounters::default();
    let mut r = rng.rng();

    // The warm-start stage, pseudo-labeling included, is not counted.
    let (augmented, _) = labeler.pseudo_label(classifier, &labeled, &pool, dataset, &mut CostCounters::default())?;
    let model = classifier.train(&augmented, dataset, None, &mut CostCounters::default())?;
    rec.record(&labeled, &model, counters);
    for step in config.warm_start..config.final_count {
        if pool.is_empty() {
            rec.exhausted(step);
            break;
        }
        let id = select_random(&pool, &mut r)?.selected_id;
        annotate_from_pool(&mut labeled, &mut pool, id, dataset)?;
        rec.select(id);
        if config.on_grid(step + 1) {
            let (augmented, _) = labeler.pseudo_label(classifier, &labeled, &pool, dataset, &mut counters)?;
            let model = classifier.train(&augmented, dataset, None, &mut counters)?;
            rec.record(&labeled, &model, counters);
        }
    }
    Ok(rec.trace)
}

/// Hybrid: each iteration pseudo-labels the pool, fits on human plus pseudo
/// labels, lets the strategy score the pool under that fit, and annotates the
/// chosen sample (which drops its pseudo label).
pub fn run_hybrid<C: Classifier>(
    classifier: &C,
    state: &RunState,
    dataset: &Dataset,
    config: &ApproachConfig,
    rng: &RngStream,
) -> Result<RunTrace<C::Model>> {
    check_state(state, dataset, config, Approach::Hybrid)?;
    let strategy = config.strategy.expect("validated");
    let mut labeler = PseudoLabeler::new(config.ssl.expect("validated"))?;
    let RunState { mut labeled, mut pool } = state.clone();
    let mut rec = Recorder::new(config, state);
    let mut counters = CostCounters::default();
    let mut r = rng.rng();

    // The warm-start stage, pseudo-labeling included, is not counted.
    let (augmented, _) = labeler.pseudo_label(classifier, &labeled, &pool, dataset, &mut CostCounters::default())?;
    let mut model = classifier.train(&augmented, dataset, None, &mut CostCounters::default())?;
    rec.record(&labeled, &model, counters);
    for step in config.warm_start..config.final_count {
        if pool.is_empty() {
            rec.exhausted(step);
            break;
        }
        let selection = select(
            strategy,
            classifier,
            &model,
            &labeled,
            &pool,
            dataset,
            config.expected_error,
            &mut r,
            &mut counters,
        )?;
        let id = selection.result.selected_id;
        annotate_from_pool(&mut labeled, &mut pool, id, dataset)?;
        rec.select(id);
        let (augmented, _) = labeler.pseudo_label(classifier, &labeled, &pool, dataset, &mut counters)?;
        model = classifier.train(&augmented, dataset, None, &mut counters)?;
        rec.record(&labeled, &model, counters);
    }
    Ok(rec.trace)
}

/// Runs whichever loop `config.approach` names.
pub fn run_approach<C: Classifier>(
    classifier: &C,
    state: &RunState,
    dataset: &Dataset,
    config: &ApproachConfig,
    rng: &RngStream,
) -> Result<RunTrace<C::Model>> {
    match config.approach {
        Approach::Passive => run_passive(classifier, state, dataset, config, rng),
        Approach::Active => run_active(classifier, state, dataset, config, rng),
        Approach::Ssl => run_ssl(classifier, state, dataset, config, rng),
        Approach::Hybrid => run_hybrid(classifier, state, dataset, config, rng),
    }
}
