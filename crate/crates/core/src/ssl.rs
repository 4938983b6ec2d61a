//! Semi-supervised pseudo-labeling of the unlabeled pool.
//!
//! Two families are provided: self-training, which repeatedly fits the
//! classifier and adopts its most certain pool prediction, and graph label
//! spreading over an RBF or kNN affinity graph.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::argmax;
use crate::model::{ClassDistribution, Classifier, CostCounters};
use crate::sets::{LabeledSet, Provenance, UnlabeledPool};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    RbfFull { sigma: f64 },
    Knn { k: usize },
}

/// Symmetric, zero-diagonal affinity matrix over `ids` (ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityGraph {
    pub kind: GraphKind,
    ids: Vec<usize>,
    weights: Vec<f64>,
}

impl AffinityGraph {
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Weight between vertex positions `i` and `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.ids.len() + j]
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn degree(&self, i: usize) -> f64 {
        let n = self.ids.len();
        self.weights[i * n..(i + 1) * n].iter().sum()
    }

    /// Builds a graph directly from a weight matrix; used for tests and demos.
    pub fn from_weights(kind: GraphKind, ids: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if weights.len() != n * n || ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("weights must be n×n over ascending ids"));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::contract("affinity diagonal must be zero"));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if w != weights[j * n + i] || !(w >= 0.0) {
                    return Err(Error::contract("affinity must be symmetric and non-negative"));
                }
            }
        }
        Ok(AffinityGraph { kind, ids, weights })
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Builds an affinity graph whose vertices are `ids` (sorted internally).
///
/// `RbfFull` connects every pair with `exp(−‖xi − xj‖² / 2σ²)`; `Knn` links
/// each vertex to its `k` nearest neighbours (distance ties broken by lower
/// id) and keeps an edge if either endpoint chose it.
pub fn build_graph(ids: &[usize], dataset: &Dataset, kind: GraphKind) -> Result<AffinityGraph> {
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    if n < 2 {
        return Err(Error::config("a graph needs at least two vertices"));
    }
    if let Some(&bad) = ids.iter().find(|&&id| !dataset.contains(id)) {
        return Err(Error::contract(format!("unknown sample id {bad}")));
    }
    match kind {
        GraphKind::RbfFull { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
            return Err(Error::config(format!("sigma must be > 0, got {sigma}")))
        }
        GraphKind::Knn { k } if k == 0 || k >= n => {
            return Err(Error::config(format!("k must lie in [1, {n}), got {k}")))
        }
        _ => {}
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(dataset.row(ids[i]), dataset.row(ids[j]));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut weights = vec![0.0; n * n];
    match kind {
        GraphKind::RbfFull { sigma } => {
            let denom = 2.0 * sigma * sigma;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        weights[i * n + j] = (-dist[i * n + j] / denom).exp();
                    }
                }
            }
        }
        GraphKind::Knn { k } => {
            let mut order: Vec<usize> = Vec::with_capacity(n - 1);
            for i in 0..n {
                order.clear();
                order.extend((0..n).filter(|&j| j != i));
                order.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
                for &j in &order[..k] {
                    weights[i * n + j] = 1.0;
                    weights[j * n + i] = 1.0;
                }
            }
        }
    }
    Ok(AffinityGraph { kind, ids, weights })
}

/// Per-vertex pseudo-label assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabeling {
    pub assignments: BTreeMap<usize, (usize, ClassDistribution)>,
    /// `false` when label spreading stopped at `max_iter` before reaching `tol`.
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadParams {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpreadParams {
    fn default() -> Self {
        SpreadParams {
            alpha: 0.2,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

impl SpreadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be >= 1"));
        }
        Ok(())
    }
}

/// Raw label-spreading scores `F` for every vertex, row-major `n × num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadScores {
    pub scores: Vec<f64>,
    pub num_classes: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SpreadScores {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_classes..(i + 1) * self.num_classes]
    }
}

/// Iterates `F ← α S F + (1 − α) Y` from `F = Y`, where
/// `S = D^{-1/2} W D^{-1/2}` and `Y` holds one-hot rows for `seeds`
/// (vertex position, class).
pub fn spread_scores(
    graph: &AffinityGraph,
    seeds: &[(usize, usize)],
    num_classes: usize,
    params: SpreadParams,
) -> Result<SpreadScores> {
    params.validate()?;
    let n = graph.len();
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d = graph.degree(i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = inv_sqrt_deg[i] * graph.weight(i, j) * inv_sqrt_deg[j];
        }
    }
    let mut y = vec![0.0; n * num_classes];
    for &(v, c) in seeds {
        if v >= n || c >= num_classes {
            return Err(Error::contract("seed outside graph or class range"));
        }
        y[v * num_classes + c] = 1.0;
    }

    let SpreadParams { alpha, tol, max_iter } = params;
    let mut f = y.clone();
    let mut next = vec![0.0; n * num_classes];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut change: f64 = 0.0;
        for i in 0..n {
            for c in 0..num_classes {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += s[i * n + j] * f[j * num_classes + c];
                }
                let v = alpha * acc + (1.0 - alpha) * y[i * num_classes + c];
                change = change.max((v - f[i * num_classes + c]).abs());
                next[i * num_classes + c] = v;
            }
        }
        std::mem::swap(&mut f, &mut next);
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(SpreadScores {
        scores: f,
        num_classes,
        converged,
        iterations,
    })
}

fn empirical_distribution(labeled: &LabeledSet, num_classes: usize) -> ClassDistribution {
    let counts: Vec<f64> = labeled
        .human_class_counts(num_classes)
        .into_iter()
        .map(|c| c as f64)
        .collect();
    ClassDistribution::from_scores(&counts).unwrap_or_else(|| ClassDistribution::uniform(num_classes))
}

/// Label spreading over `graph`, seeded with the human labels in `labeled`.
///
/// Pool vertices whose score row is all zero (e.g. isolated vertices) get the
/// empirical human-label class distribution.
pub fn label_spread(
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    graph: &AffinityGraph,
    params: SpreadParams,
) -> Result<PseudoLabeling> {
    let humans = labeled.humans();
    if humans.is_empty() {
        return Err(Error::contract("label spreading needs at least one human label"));
    }
    let mut expected: Vec<usize> = humans.ids().chain(pool.ids().iter().copied()).collect();
    expected.sort_unstable();
    if expected != graph.ids() {
        return Err(Error::contract(
            "graph vertices must be exactly the labeled and pool ids",
        ));
    }
    let c = dataset.num_classes();
    let seeds: Vec<(usize, usize)> = humans
        .iter()
        .map(|(id, e)| (graph.position(id).expect("checked above"), e.label))
        .collect();
    let spread = spread_scores(graph, &seeds, c, params)?;
    let fallback = empirical_distribution(&humans, c);
    let assignments = pool
        .ids()
        .iter()
        .map(|&id| {
            let row = spread.row(graph.position(id).expect("checked above"));
            let dist = ClassDistribution::from_scores(row).unwrap_or_else(|| fallback.clone());
            (id, (dist.predicted(), dist))
        })
        .collect();
    Ok(PseudoLabeling {
        assignments,
        converged: spread.converged,
        iterations: spread.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfTrainVariant {
    MaxConfidence,
    MinEntropy,
}

/// Self-training: fit, adopt the most certain pool prediction as a pseudo
/// label, refit warm-started from the previous fit, until the pool is empty.
///
/// Returns the final fit (on all human and pseudo labels) and the pseudo
/// labels in the order they were assigned (via the map's values).
pub fn self_train<C: Classifier>(
    classifier: &C,
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    variant: SelfTrainVariant,
    counters: &mut CostCounters,
) -> Result<(C::Model, PseudoLabeling)> {
    if labeled.is_empty() {
        return Err(Error::contract("self-training needs a labeled set"));
    }
    let mut labeled = labeled.clone();
    let mut pool = pool.clone();
    let mut assignments = BTreeMap::new();
    let mut previous: Option<C::Model> = None;
    let mut iterations = 0;
    loop {
        let model = classifier.train(&labeled, dataset, previous.as_ref(), counters)?;
        if pool.is_empty() {
            return Ok((
                model,
                PseudoLabeling {
                    assignments,
                    converged: true,
                    iterations,
                },
            ));
        }
        let dists = classifier.predict_proba(&model, pool.ids(), dataset, counters)?;
        let score = |d: &ClassDistribution| match variant {
            SelfTrainVariant::MaxConfidence => d.confidence(),
            SelfTrainVariant::MinEntropy => -d.entropy(),
        };
        let scores: Vec<f64> = dists.iter().map(score).collect();
        let best = argmax(&scores);
        let id = pool.ids()[best];
        let dist = dists[best].clone();
        let label = dist.predicted();
        labeled.insert(id, label, Provenance::Pseudo, 1.0)?;
        pool.take(id)?;
        assignments.insert(id, (label, dist));
        previous = Some(model);
        iterations += 1;
    }
}

/// Named SSL methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SslMethod {
    SelfTrainMaxconf,
    SelfTrainMinentropy,
    SpreadRbf,
    SpreadKnn,
}

impl SslMethod {
    pub const ALL: [SslMethod; 4] = [
        SslMethod::SelfTrainMaxconf,
        SslMethod::SelfTrainMinentropy,
        SslMethod::SpreadRbf,
        SslMethod::SpreadKnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SslMethod::SelfTrainMaxconf => "self_train_maxconf",
            SslMethod::SelfTrainMinentropy => "self_train_minentropy",
            SslMethod::SpreadRbf => "spread_rbf",
            SslMethod::SpreadKnn => "spread_knn",
        }
    }
}

impl fmt::Display for SslMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SslMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SslMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ssl method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SslConfig {
    pub method: SslMethod,
    pub sigma: f64,
    pub k: usize,
    pub spread: SpreadParams,
    /// Training weight of each pseudo-labeled sample; human labels weigh 1.
    pub pseudo_weight: f64,
}

impl Default for SslConfig {
    fn default() -> Self {
        SslConfig {
            method: SslMethod::SpreadRbf,
            sigma: 0.1,
            k: 7,
            spread: SpreadParams::default(),
            pseudo_weight: 1.0,
        }
    }
}

impl SslConfig {
    /// Settings used for the standalone SSL experiments: kNN with 7 neighbours, RBF σ = 0.1.
    pub fn ssl_preset(method: SslMethod) -> Self {
        SslConfig {
            method,
            ..SslConfig::default()
        }
    }

    /// Settings used inside the hybrid approach: RBF spreading with σ = 0.01.
    pub fn hybrid_preset() -> Self {
        SslConfig {
            method: SslMethod::SpreadRbf,
            sigma: 0.01,
            ..SslConfig::default()
        }
    }

    pub fn graph_kind(&self) -> Option<GraphKind> {
        match self.method {
            SslMethod::SpreadRbf => Some(GraphKind::RbfFull { sigma: self.sigma }),
            SslMethod::SpreadKnn => Some(GraphKind::Knn { k: self.k }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pseudo_weight >= 0.0 && self.pseudo_weight.is_finite()) {
            return Err(Error::config("pseudo_weight must be >= 0"));
        }
        match self.method {
            SslMethod::SpreadRbf if !(self.sigma > 0.0 && self.sigma.is_finite()) => {
                Err(Error::config("sigma must be > 0"))
            }
            SslMethod::SpreadKnn if self.k == 0 => Err(Error::config("k must be >= 1")),
            SslMethod::SpreadRbf | SslMethod::SpreadKnn => self.spread.validate(),
            _ => Ok(()),
        }
    }
}

/// Pseudo-labels a pool, caching the affinity graph across calls as long as
/// the vertex set (labeled ∪ pool) stays the same.
#[derive(Debug, Clone)]
pub struct PseudoLabeler {
    config: SslConfig,
    graph: Option<AffinityGraph>,
}

impl PseudoLabeler {
    pub fn new(config: SslConfig) -> Result<Self> {
        config.validate()?;
        Ok(PseudoLabeler { config, graph: None })
    }

    pub fn config(&self) -> &SslConfig {
        &self.config
    }

    /// Returns the human entries of `labeled` plus one pseudo entry per pool sample.
    ///
    /// With `pseudo_weight == 0` every pool sample gets the majority human
    /// class and nothing is trained or counted.
    pub fn pseudo_label<C: Classifier>(
        &mut self,
        classifier: &C,
        labeled: &LabeledSet,
        pool: &UnlabeledPool,
        dataset: &Dataset,
        counters: &mut CostCounters,
    ) -> Result<(LabeledSet, PseudoLabeling)> {
        let humans = labeled.humans();
        let labeling = if pool.is_empty() {
            PseudoLabeling {
                assignments: BTreeMap::new(),
                converged: true,
                iterations: 0,
            }
        } else if self.config.pseudo_weight == 0.0 {
            // zero-weight entries never reach training; skip the method
            let fallback = empirical_distribution(&humans, dataset.num_classes());
            PseudoLabeling {
                assignments: pool
                    .ids()
                    .iter()
                    .map(|&id| (id, (fallback.predicted(), fallback.clone())))
                    .collect(),
                converged: true,
                iterations: 0,
            }
        } else {
            match self.config.method {
                SslMethod::SelfTrainMaxconf | SslMethod::SelfTrainMinentropy => {
                    let variant = if self.config.method == SslMethod::SelfTrainMaxconf {
                        SelfTrainVariant::MaxConfidence
                    } else {
                        SelfTrainVariant::MinEntropy
                    };
                    self_train(classifier, &humans, pool, dataset, variant, counters)?.1
                }
                SslMethod::SpreadRbf | SslMethod::SpreadKnn => {
                    let mut vertices: Vec<usize> = humans.ids().chain(pool.ids().iter().copied()).collect();
                    vertices.sort_unstable();
                    let stale = self.graph.as_ref().is_none_or(|g| g.ids() != vertices.as_slice());
                    if stale {
                        let kind = self.config.graph_kind().expect("spread method");
                        self.graph = Some(build_graph(&vertices, dataset, kind)?);
                    }
                    let graph = self.graph.as_ref().expect("built above");
                    label_spread(&humans, pool, dataset, graph, self.config.spread)?
                }
            }
        };
        let mut augmented = humans;
        for (&id, (label, _)) in &labeling.assignments {
            augmented.insert(id, *label, Provenance::Pseudo, self.config.pseudo_weight)?;
        }
        Ok((augmented, labeling))
    }
}

/// One-shot form of [`PseudoLabeler::pseudo_label`].
pub fn pseudo_label<C: Classifier>(
    classifier: &C,
    labeled: &LabeledSet,
    pool: &UnlabeledPool,
    dataset: &Dataset,
    config: SslConfig,
    counters: &mut CostCounters,
) -> Result<LabeledSet> {
    PseudoLabeler::new(config)?
        .pseudo_label(classifier, labeled, pool, dataset, counters)
        .map(|(set, _)| set)
}
