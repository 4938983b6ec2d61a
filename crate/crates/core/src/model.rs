//! Probabilistic classifiers.
//!
//! Every sampling strategy and pseudo-labeling method consumes only the class
//! posterior `P(y|x)`, so they are written against the [`Classifier`] trait.
//! [`LogisticRegression`] is the built-in implementation: multinomial
//! logistic regression fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::argmax;
use crate::sets::LabeledSet;

/// Number of model fits and per-sample inferences performed in one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub train_count: u64,
    pub infer_count: u64,
}

impl CostCounters {
    pub fn merge(&mut self, other: CostCounters) {
        self.train_count += other.train_count;
        self.infer_count += other.infer_count;
    }

    /// Counts accumulated since `earlier`.
    pub fn since(&self, earlier: CostCounters) -> CostCounters {
        CostCounters {
            train_count: self.train_count - earlier.train_count,
            infer_count: self.infer_count - earlier.infer_count,
        }
    }
}

/// A probability vector over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    /// Wraps a vector that is already a probability distribution.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("{probs:?} is not a probability vector")));
        }
        Ok(ClassDistribution(probs))
    }

    /// Normalizes non-negative scores; `None` when they sum to zero.
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        let sum: f64 = scores.iter().sum();
        (sum > 0.0 && sum.is_finite()).then(|| ClassDistribution(scores.iter().map(|s| s / sum).collect()))
    }

    pub fn uniform(num_classes: usize) -> Self {
        ClassDistribution(vec![1.0 / num_classes as f64; num_classes])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Most likely class, lowest index on ties.
    pub fn predicted(&self) -> usize {
        argmax(&self.0)
    }

    pub fn confidence(&self) -> f64 {
        self.0[self.predicted()]
    }

    pub fn entropy(&self) -> f64 {
        crate::metrics::entropy(&self.0)
    }
}

/// Interface shared by every probabilistic classifier.
///
/// Implementations must bump `train_count` once per `train`/`retrain` call and
/// `infer_count` once per scored sample.
pub trait Classifier: Sync {
    type Model: Clone + std::fmt::Debug + PartialEq + Send + Sync;

    fn train(
        &self,
        labeled: &LabeledSet,
        dataset: &Dataset,
        init: Option<&Self::Model>,
        counters: &mut CostCounters,
    ) -> Result<Self::Model>;

    /// A cheaper fit starting from `init`, used for hypothetical updates.
    fn retrain(
        &self,
        labeled: &LabeledSet,
        dataset: &Dataset,
        init: &Self::Model,
        budget: usize,
        counters: &mut CostCounters,
    ) -> Result<Self::Model>;

    fn predict_proba(
        &self,
        model: &Self::Model,
        ids: &[usize],
        dataset: &Dataset,
        counters: &mut CostCounters,
    ) -> Result<Vec<ClassDistribution>>;

    fn predict(
        &self,
        model: &Self::Model,
        ids: &[usize],
        dataset: &Dataset,
        counters: &mut CostCounters,
    ) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(model, ids, dataset, counters)?
            .iter()
            .map(ClassDistribution::predicted)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            l2: 1e-3,
            epochs: 200,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2 must be >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Weights (`num_classes × dim`, row-major) and per-class bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub num_classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        ModelParams {
            num_classes,
            dim,
            weights: vec![0.0; num_classes * dim],
            bias: vec![0.0; num_classes],
        }
    }

    pub fn class_weights(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|x| x.is_finite())
    }

    fn check_shape(&self, dataset: &Dataset) -> Result<()> {
        if self.num_classes != dataset.num_classes() || self.dim != dataset.dim() {
            return Err(Error::contract(format!(
                "model shape {}x{} does not match dataset {}x{}",
                self.num_classes,
                self.dim,
                dataset.num_classes(),
                dataset.dim()
            )));
        }
        Ok(())
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(self.class_weights(c), x) + self.bias[c];
        }
    }

    /// Class posterior for one feature row.
    pub fn distribution(&self, x: &[f64]) -> ClassDistribution {
        let mut z = vec![0.0; self.num_classes];
        self.logits_into(x, &mut z);
        softmax_in_place(&mut z);
        ClassDistribution(z)
    }
}

// Four independent partial sums let the compiler vectorize the reduction.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Max-subtracted softmax; returns the log-sum-exp of the input.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

/// Training rows with positive weight, in ascending id order.
struct Batch<'a> {
    rows: Vec<(&'a [f64], usize, f64)>,
    total_weight: f64,
}

impl<'a> Batch<'a> {
    fn new(labeled: &LabeledSet, dataset: &'a Dataset) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::contract("cannot train on an empty labeled set"));
        }
        let mut rows = Vec::with_capacity(labeled.len());
        for (id, e) in labeled.iter() {
            if !dataset.contains(id) {
                return Err(Error::contract(format!("labeled id {id} not in dataset")));
            }
            if e.label >= dataset.num_classes() {
                return Err(Error::contract(format!("label {} out of range", e.label)));
            }
            // Zero-weight entries contribute nothing; skipping them keeps the
            // fit bit-identical to one without those entries.
            if e.weight > 0.0 {
                rows.push((dataset.row(id), e.label, e.weight));
            }
        }
        let total_weight = rows.iter().map(|r| r.2).sum();
        Ok(Batch { rows, total_weight })
    }
}

/// Weighted mean cross-entropy plus `l2/2 · ‖W‖²` (bias unpenalized), and its gradient.
fn objective(params: &ModelParams, batch: &Batch<'_>, l2: f64, grad: Option<&mut ModelParams>) -> f64 {
    let c = params.num_classes;
    let mut z = vec![0.0; c];
    let mut data_loss = 0.0;
    let norm = if batch.total_weight > 0.0 {
        1.0 / batch.total_weight
    } else {
        0.0
    };
    let mut grad = grad;
    if let Some(g) = grad.as_deref_mut() {
        g.weights.iter_mut().for_each(|v| *v = 0.0);
        g.bias.iter_mut().for_each(|v| *v = 0.0);
    }
    for &(x, y, w) in &batch.rows {
        params.logits_into(x, &mut z);
        let logit_y = z[y];
        let lse = softmax_in_place(&mut z);
        data_loss += w * (lse - logit_y);
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..c {
                let coef = w * norm * (z[k] - if k == y { 1.0 } else { 0.0 });
                g.bias[k] += coef;
                let gw = &mut g.weights[k * params.dim..(k + 1) * params.dim];
                for (gv, xv) in gw.iter_mut().zip(x) {
                    *gv += coef * xv;
                }
            }
        }
    }
    if let Some(g) = grad {
        for (gv, wv) in g.weights.iter_mut().zip(&params.weights) {
            *gv += l2 * wv;
        }
    }
    let reg: f64 = params.weights.iter().map(|w| w * w).sum();
    data_loss * norm + 0.5 * l2 * reg
}

/// Regularized training loss of `params` on `labeled`.
pub fn training_loss(params: &ModelParams, labeled: &LabeledSet, dataset: &Dataset, l2: f64) -> Result<f64> {
    params.check_shape(dataset)?;
    Ok(objective(params, &Batch::new(labeled, dataset)?, l2, None))
}

/// Analytic gradient of [`training_loss`], laid out like `params`.
pub fn training_gradient(
    params: &ModelParams,
    labeled: &LabeledSet,
    dataset: &Dataset,
    l2: f64,
) -> Result<ModelParams> {
    params.check_shape(dataset)?;
    let mut g = ModelParams::zeros(params.num_classes, params.dim);
    objective(params, &Batch::new(labeled, dataset)?, l2, Some(&mut g));
    Ok(g)
}

/// Multinomial logistic regression trained by full-batch gradient descent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub hyper: Hyper,
}

impl LogisticRegression {
    pub fn new(hyper: Hyper) -> Result<Self> {
        hyper.validate()?;
        Ok(LogisticRegression { hyper })
    }

    /// Runs `epochs` gradient steps; returns the fitted params and the loss
    /// observed before each step.
    pub fn fit(
        &self,
        labeled: &LabeledSet,
        dataset: &Dataset,
        init: Option<&ModelParams>,
        epochs: usize,
    ) -> Result<(ModelParams, Vec<f64>)> {
        if epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        let batch = Batch::new(labeled, dataset)?;
        let params = match init {
            Some(p) => {
                p.check_shape(dataset)?;
                p.clone()
            }
            None => ModelParams::zeros(dataset.num_classes(), dataset.dim()),
        };
        let Hyper { learning_rate, l2, .. } = self.hyper;
        if batch.rows.len() < params.dim {
            fit_dual(params, &batch, learning_rate, l2, epochs)
        } else {
            fit_primal(params, &batch, learning_rate, l2, epochs)
        }
    }
}

fn fit_primal(
    mut params: ModelParams,
    batch: &Batch<'_>,
    learning_rate: f64,
    l2: f64,
    epochs: usize,
) -> Result<(ModelParams, Vec<f64>)> {
    let mut grad = ModelParams::zeros(params.num_classes, params.dim);
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let loss = objective(&params, batch, l2, Some(&mut grad));
        if !loss.is_finite() {
            return Err(Error::Numeric { epoch });
        }
        losses.push(loss);
        for (w, g) in params.weights.iter_mut().zip(&grad.weights) {
            *w -= learning_rate * g;
        }
        for (b, g) in params.bias.iter_mut().zip(&grad.bias) {
            *b -= learning_rate * g;
        }
    }
    if !params.is_finite() {
        return Err(Error::Numeric { epoch: epochs });
    }
    Ok((params, losses))
}

/// Same iterates as the primal loop, tracked as `W = s·W₀ + A·X` where `X`
/// holds the batch rows. Each step then costs `O(C·n²)` instead of `O(C·n·d)`.
fn fit_dual(
    init: ModelParams,
    batch: &Batch<'_>,
    learning_rate: f64,
    l2: f64,
    epochs: usize,
) -> Result<(ModelParams, Vec<f64>)> {
    let n = batch.rows.len();
    let c = init.num_classes;
    let norm = if batch.total_weight > 0.0 {
        1.0 / batch.total_weight
    } else {
        0.0
    };
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = dot(batch.rows[i].0, batch.rows[j].0);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    // w0x[k][i] = W₀_k · x_i
    let mut w0x = vec![0.0; c * n];
    for k in 0..c {
        for (i, row) in batch.rows.iter().enumerate() {
            w0x[k * n + i] = dot(init.class_weights(k), row.0);
        }
    }
    let w0_sq: f64 = init.weights.iter().map(|w| w * w).sum();
    let mut scale = 1.0;
    let mut coef = vec![0.0; c * n];
    let mut bias = init.bias.clone();
    let mut ak = vec![0.0; c * n];
    let mut g = vec![0.0; c * n];
    let mut z = vec![0.0; c];
    let mut losses = Vec::with_capacity(epochs);
    let decay = 1.0 - learning_rate * l2;
    for epoch in 0..epochs {
        for k in 0..c {
            let a = &coef[k * n..(k + 1) * n];
            for i in 0..n {
                ak[k * n + i] = dot(a, &gram[i * n..(i + 1) * n]);
            }
        }
        let mut data_loss = 0.0;
        for (i, &(_, y, w)) in batch.rows.iter().enumerate() {
            for k in 0..c {
                z[k] = scale * w0x[k * n + i] + ak[k * n + i] + bias[k];
            }
            let logit_y = z[y];
            let lse = softmax_in_place(&mut z);
            data_loss += w * (lse - logit_y);
            for k in 0..c {
                g[k * n + i] = w * norm * (z[k] - if k == y { 1.0 } else { 0.0 });
            }
        }
        let cross = dot(&coef, &w0x);
        let quad = dot(&coef, &ak);
        let reg = scale * scale * w0_sq + 2.0 * scale * cross + quad;
        let loss = data_loss * norm + 0.5 * l2 * reg;
        if !loss.is_finite() {
            return Err(Error::Numeric { epoch });
        }
        losses.push(loss);
        scale *= decay;
        for (a, gv) in coef.iter_mut().zip(&g) {
            *a = decay * *a - learning_rate * gv;
        }
        for k in 0..c {
            bias[k] -= learning_rate * g[k * n..(k + 1) * n].iter().sum::<f64>();
        }
    }
    let mut params = init;
    for w in params.weights.iter_mut() {
        *w *= scale;
    }
    let dim = params.dim;
    for k in 0..c {
        let wk = &mut params.weights[k * dim..(k + 1) * dim];
        for (i, row) in batch.rows.iter().enumerate() {
            let a = coef[k * n + i];
            for (wv, xv) in wk.iter_mut().zip(row.0) {
                *wv += a * xv;
            }
        }
    }
    params.bias = bias;
    if !params.is_finite() {
        return Err(Error::Numeric { epoch: epochs });
    }
    Ok((params, losses))
}

impl Classifier for LogisticRegression {
    type Model = ModelParams;

    fn train(
        &self,
        labeled: &LabeledSet,
        dataset: &Dataset,
        init: Option<&ModelParams>,
        counters: &mut CostCounters,
    ) -> Result<ModelParams> {
        let (params, _) = self.fit(labeled, dataset, init, self.hyper.epochs)?;
        counters.train_count += 1;
        Ok(params)
    }

    fn retrain(
        &self,
        labeled: &LabeledSet,
        dataset: &Dataset,
        init: &ModelParams,
        budget: usize,
        counters: &mut CostCounters,
    ) -> Result<ModelParams> {
        let (params, _) = self.fit(labeled, dataset, Some(init), budget)?;
        counters.train_count += 1;
        Ok(params)
    }

    fn predict_proba(
        &self,
        model: &ModelParams,
        ids: &[usize],
        dataset: &Dataset,
        counters: &mut CostCounters,
    ) -> Result<Vec<ClassDistribution>> {
        model.check_shape(dataset)?;
        if let Some(&bad) = ids.iter().find(|&&id| !dataset.contains(id)) {
            return Err(Error::contract(format!("unknown sample id {bad}")));
        }
        counters.infer_count += ids.len() as u64;
        Ok(ids.iter().map(|&id| model.distribution(dataset.row(id))).collect())
    }
}
