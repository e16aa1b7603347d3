//! Small differentiable classifiers.
//!
//! Two model families are supported: multinomial softmax regression and a
//! one-hidden-layer perceptron with `tanh` activations. Parameters live in a
//! single flat [`ParamVector`] so that aggregation and influence scoring can
//! treat every model the same way.
//!
//! Flat layouts (row-major weight matrices):
//!
//! * softmax regression: `W[classes × input]`, `b[classes]`
//! * mlp: `W1[hidden × input]`, `b1[hidden]`, `W2[classes × hidden]`, `b2[classes]`

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Half-width of the uniform weight initializer.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "softmax-regression", alias = "softmax_regression")]
    SoftmaxRegression,
    #[serde(rename = "mlp")]
    Mlp,
}

/// Architecture of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Width of the hidden layer; required for [`ModelKind::Mlp`] only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
}

impl ModelSpec {
    pub fn softmax(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::SoftmaxRegression,
            input_dim,
            num_classes,
            hidden_dim: None,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_dim: Some(hidden_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("model input_dim must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("model num_classes must be at least 2"));
        }
        match (self.kind, self.hidden_dim) {
            (ModelKind::Mlp, None) | (ModelKind::Mlp, Some(0)) => Err(Error::config("mlp models need hidden_dim >= 1")),
            (ModelKind::SoftmaxRegression, Some(_)) => {
                Err(Error::config("hidden_dim is only meaningful for mlp models"))
            }
            _ => Ok(()),
        }
    }

    fn hidden(&self) -> usize {
        self.hidden_dim.unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        let (d, c) = (self.input_dim, self.num_classes);
        match self.kind {
            ModelKind::SoftmaxRegression => d * c + c,
            ModelKind::Mlp => {
                let h = self.hidden();
                d * h + h + h * c + c
            }
        }
    }

    /// Ranges of the flat vector that hold biases.
    fn bias_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let (d, c) = (self.input_dim, self.num_classes);
        match self.kind {
            ModelKind::SoftmaxRegression => vec![d * c..d * c + c],
            ModelKind::Mlp => {
                let h = self.hidden();
                let b2 = d * h + h + h * c;
                vec![d * h..d * h + h, b2..b2 + c]
            }
        }
    }
}

/// Flat model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        LabeledExample { features, label }
    }
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Clamped to the data size.
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

/// Draws initial parameters: weights uniform in `[-INIT_SCALE, INIT_SCALE]`,
/// biases zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    let mut rng = rng_from(seed);
    let mut values: Vec<f64> = (0..spec.param_count())
        .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
        .collect();
    for range in spec.bias_ranges() {
        values[range].fill(0.0);
    }
    ParamVector(values)
}

fn check_params(spec: &ModelSpec, theta: &ParamVector) -> Result<()> {
    if theta.len() != spec.param_count() {
        return Err(Error::dim(format!(
            "parameter vector has {} entries, model needs {}",
            theta.len(),
            spec.param_count()
        )));
    }
    Ok(())
}

fn check_batch(spec: &ModelSpec, batch: &[LabeledExample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::dim("batch is empty"));
    }
    for (i, ex) in batch.iter().enumerate() {
        if ex.features.len() != spec.input_dim {
            return Err(Error::dim(format!(
                "example {i} has {} features, model expects {}",
                ex.features.len(),
                spec.input_dim
            )));
        }
        if ex.label >= spec.num_classes {
            return Err(Error::dim(format!(
                "example {i} has label {} but model has {} classes",
                ex.label, spec.num_classes
            )));
        }
    }
    Ok(())
}

/// Per-call scratch space for a forward pass.
struct Workspace {
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl Workspace {
    fn new(spec: &ModelSpec) -> Self {
        Workspace {
            hidden: vec![0.0; spec.hidden()],
            logits: vec![0.0; spec.num_classes],
        }
    }
}

fn affine(weights: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &weights[r * cols..(r + 1) * cols];
        *o = bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// Fills `ws.logits` (and `ws.hidden` for the mlp).
fn forward(spec: &ModelSpec, theta: &[f64], x: &[f64], ws: &mut Workspace) {
    let (d, c) = (spec.input_dim, spec.num_classes);
    match spec.kind {
        ModelKind::SoftmaxRegression => {
            affine(&theta[..d * c], &theta[d * c..d * c + c], x, &mut ws.logits);
        }
        ModelKind::Mlp => {
            let h = spec.hidden();
            let (w1, rest) = theta.split_at(d * h);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h * c);
            affine(w1, b1, x, &mut ws.hidden);
            for v in ws.hidden.iter_mut() {
                *v = v.tanh();
            }
            affine(w2, b2, &ws.hidden, &mut ws.logits);
        }
    }
}

/// Turns logits into probabilities in place and returns `log(sum(exp(logits)))`.
fn softmax_in_place(logits: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
    max + sum.ln()
}

fn example_loss(spec: &ModelSpec, theta: &[f64], ex: &LabeledExample, ws: &mut Workspace) -> f64 {
    forward(spec, theta, &ex.features, ws);
    let true_logit = ws.logits[ex.label];
    let lse = softmax_in_place(&mut ws.logits);
    lse - true_logit
}

/// Class probabilities for a single input.
pub fn predict_proba(spec: &ModelSpec, theta: &ParamVector, features: &[f64]) -> Result<Vec<f64>> {
    check_params(spec, theta)?;
    if features.len() != spec.input_dim {
        return Err(Error::dim(format!(
            "input has {} features, model expects {}",
            features.len(),
            spec.input_dim
        )));
    }
    let mut ws = Workspace::new(spec);
    forward(spec, theta.as_slice(), features, &mut ws);
    softmax_in_place(&mut ws.logits);
    Ok(ws.logits)
}

/// Mean cross-entropy of `theta` over `batch`.
pub fn forward_loss(spec: &ModelSpec, theta: &ParamVector, batch: &[LabeledExample]) -> Result<f64> {
    check_params(spec, theta)?;
    check_batch(spec, batch)?;
    let mut ws = Workspace::new(spec);
    let total: f64 = batch
        .iter()
        .map(|ex| example_loss(spec, theta.as_slice(), ex, &mut ws))
        .sum();
    Ok(total / batch.len() as f64)
}

/// Mean loss and its gradient in one pass. Inputs must already be validated.
fn loss_and_gradient_unchecked(spec: &ModelSpec, theta: &[f64], batch: &[&LabeledExample], grad: &mut [f64]) -> f64 {
    grad.fill(0.0);
    let (d, c) = (spec.input_dim, spec.num_classes);
    let mut ws = Workspace::new(spec);
    let mut dz = vec![0.0; spec.hidden()];
    let mut total = 0.0;
    for ex in batch {
        total += example_loss(spec, theta, ex, &mut ws);
        // ws.logits now holds probabilities; turn them into dL/dlogits.
        ws.logits[ex.label] -= 1.0;
        let dlogits = &ws.logits;
        let x = &ex.features;
        match spec.kind {
            ModelKind::SoftmaxRegression => {
                let (gw, gb) = grad.split_at_mut(d * c);
                for (k, &g) in dlogits.iter().enumerate() {
                    for (gwk, xv) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *gwk += g * xv;
                    }
                    gb[k] += g;
                }
            }
            ModelKind::Mlp => {
                let h = spec.hidden();
                let w2 = &theta[d * h + h..d * h + h + h * c];
                let (gw1, rest) = grad.split_at_mut(d * h);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h * c);
                dz.fill(0.0);
                for (k, &g) in dlogits.iter().enumerate() {
                    let w2_row = &w2[k * h..(k + 1) * h];
                    for (j, gw2kj) in gw2[k * h..(k + 1) * h].iter_mut().enumerate() {
                        *gw2kj += g * ws.hidden[j];
                        dz[j] += g * w2_row[j];
                    }
                    gb2[k] += g;
                }
                for j in 0..h {
                    let a = ws.hidden[j];
                    let delta = dz[j] * (1.0 - a * a);
                    for (g1, xv) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g1 += delta * xv;
                    }
                    gb1[j] += delta;
                }
            }
        }
    }
    let n = batch.len() as f64;
    for g in grad.iter_mut() {
        *g /= n;
    }
    total / n
}

/// Analytic gradient of the mean cross-entropy.
pub fn gradient(spec: &ModelSpec, theta: &ParamVector, batch: &[LabeledExample]) -> Result<ParamVector> {
    check_params(spec, theta)?;
    check_batch(spec, batch)?;
    let refs: Vec<&LabeledExample> = batch.iter().collect();
    let mut grad = vec![0.0; theta.len()];
    loss_and_gradient_unchecked(spec, theta.as_slice(), &refs, &mut grad);
    Ok(ParamVector(grad))
}

/// Runs `cfg.epochs` epochs of mini-batch SGD starting from `theta0`.
///
/// Each epoch visits the data in a fresh seeded permutation. When one batch
/// covers the whole set the original order is kept, so a single epoch is
/// exactly one full-batch gradient step.
pub fn local_train(
    spec: &ModelSpec,
    theta0: &ParamVector,
    data: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    check_params(spec, theta0)?;
    check_batch(spec, data)?;
    let batch_size = cfg.batch_size.clamp(1, data.len());
    let mut rng = rng_from(cfg.shuffle_seed);
    let mut order: Vec<&LabeledExample> = data.iter().collect();
    let mut theta = theta0.clone();
    let mut grad = vec![0.0; theta.len()];

    for epoch in 0..cfg.epochs {
        if batch_size < data.len() {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(batch_size) {
            let loss = loss_and_gradient_unchecked(spec, theta.as_slice(), batch, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            for (t, g) in theta.as_mut_slice().iter_mut().zip(&grad) {
                *t -= cfg.learning_rate * g;
            }
        }
    }
    if !theta.is_finite() {
        return Err(Error::Divergence {
            epoch: cfg.epochs.saturating_sub(1),
        });
    }
    Ok(theta)
}

/// Loss and accuracy of a model on a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(spec: &ModelSpec, theta: &ParamVector, data: &[LabeledExample]) -> Result<Evaluation> {
    check_params(spec, theta)?;
    check_batch(spec, data)?;
    let mut ws = Workspace::new(spec);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in data {
        forward(spec, theta.as_slice(), &ex.features, &mut ws);
        if argmax(&ws.logits) == ex.label {
            correct += 1;
        }
        let true_logit = ws.logits[ex.label];
        loss += softmax_in_place(&mut ws.logits) - true_logit;
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_batch(spec: &ModelSpec, n: usize, seed: u64) -> Vec<LabeledExample> {
        let mut rng = rng_from(seed);
        (0..n)
            .map(|_| {
                let features = (0..spec.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                LabeledExample::new(features, rng.random_range(0..spec.num_classes))
            })
            .collect()
    }

    fn random_params(spec: &ModelSpec, scale: f64, seed: u64) -> ParamVector {
        let mut rng = rng_from(seed);
        ParamVector::new(
            (0..spec.param_count())
                .map(|_| rng.random_range(-scale..scale))
                .collect(),
        )
    }

    /// Straight-line reference: naive logits, explicit exp/sum/log per example.
    fn reference_loss(spec: &ModelSpec, theta: &[f64], batch: &[LabeledExample]) -> f64 {
        let (d, c) = (spec.input_dim, spec.num_classes);
        let mut total = 0.0;
        for ex in batch {
            let logits: Vec<f64> = match spec.kind {
                ModelKind::SoftmaxRegression => (0..c)
                    .map(|k| {
                        let mut s = theta[d * c + k];
                        for j in 0..d {
                            s += theta[k * d + j] * ex.features[j];
                        }
                        s
                    })
                    .collect(),
                ModelKind::Mlp => {
                    let h = spec.hidden_dim.unwrap();
                    let hid: Vec<f64> = (0..h)
                        .map(|u| {
                            let mut s = theta[d * h + u];
                            for j in 0..d {
                                s += theta[u * d + j] * ex.features[j];
                            }
                            s.tanh()
                        })
                        .collect();
                    let off = d * h + h;
                    (0..c)
                        .map(|k| {
                            let mut s = theta[off + h * c + k];
                            for u in 0..h {
                                s += theta[off + k * h + u] * hid[u];
                            }
                            s
                        })
                        .collect()
                }
            };
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            total += -(logits[ex.label].exp() / z).ln();
        }
        total / batch.len() as f64
    }

    fn finite_difference(spec: &ModelSpec, theta: &ParamVector, batch: &[LabeledExample], i: usize) -> f64 {
        let h = 1e-5;
        let mut plus = theta.clone();
        plus.as_mut_slice()[i] += h;
        let mut minus = theta.clone();
        minus.as_mut_slice()[i] -= h;
        (forward_loss(spec, &plus, batch).unwrap() - forward_loss(spec, &minus, batch).unwrap()) / (2.0 * h)
    }

    #[test]
    fn parameter_counts() {
        let s = ModelSpec::softmax(2, 2);
        let theta = init_params(&s, 7);
        assert_eq!(theta.len(), 6);
        assert_eq!(theta, init_params(&s, 7));
        assert_eq!(&theta.as_slice()[4..], &[0.0, 0.0]);
        assert_eq!(init_params(&ModelSpec::mlp(4, 8, 3), 1).len(), 67);
    }

    #[test]
    fn init_is_small_and_biases_zero() {
        let s = ModelSpec::mlp(4, 8, 3);
        let theta = init_params(&s, 3);
        assert!(theta.as_slice().iter().all(|v| v.abs() <= INIT_SCALE));
        assert!(theta.as_slice()[32..40].iter().all(|&v| v == 0.0));
        assert!(theta.as_slice()[64..].iter().all(|&v| v == 0.0));
        assert_ne!(theta, init_params(&s, 4));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::softmax(0, 2).validate().is_err());
        assert!(ModelSpec::softmax(3, 1).validate().is_err());
        assert!(ModelSpec::mlp(3, 0, 2).validate().is_err());
        assert!(ModelSpec::mlp(3, 4, 2).validate().is_ok());
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let s = ModelSpec::softmax(3, 2);
        let batch = random_batch(&s, 10, 1);
        let loss = forward_loss(&s, &ParamVector::zeros(s.param_count()), &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_model_has_near_zero_loss() {
        let s = ModelSpec::softmax(1, 2);
        // logit_1 - logit_0 = 100 for x = 1
        let theta = ParamVector::new(vec![-50.0, 50.0, 0.0, 0.0]);
        let loss = forward_loss(&s, &theta, &[LabeledExample::new(vec![1.0], 1)]).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn loss_matches_reference() {
        for (k, spec) in [ModelSpec::softmax(5, 4), ModelSpec::mlp(5, 6, 4)].iter().enumerate() {
            for seed in 0..10 {
                let theta = random_params(spec, 1.0, 100 + seed);
                let batch = random_batch(spec, 17, 200 + seed + k as u64);
                let a = forward_loss(spec, &theta, &batch).unwrap();
                let b = reference_loss(spec, theta.as_slice(), &batch);
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn structural_errors() {
        let s = ModelSpec::softmax(3, 2);
        let theta = ParamVector::zeros(s.param_count());
        assert!(matches!(forward_loss(&s, &theta, &[]), Err(Error::Dimension(_))));
        let bad = vec![LabeledExample::new(vec![0.0; 2], 0)];
        assert!(matches!(forward_loss(&s, &theta, &bad), Err(Error::Dimension(_))));
        let bad_label = vec![LabeledExample::new(vec![0.0; 3], 2)];
        assert!(matches!(gradient(&s, &theta, &bad_label), Err(Error::Dimension(_))));
        assert!(matches!(
            forward_loss(&s, &ParamVector::zeros(3), &random_batch(&s, 2, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn bias_gradients_sum_to_zero() {
        let s = ModelSpec::softmax(2, 3);
        let batch = vec![
            LabeledExample::new(vec![1.0, -1.0], 0),
            LabeledExample::new(vec![-1.0, 1.0], 1),
            LabeledExample::new(vec![1.0, 1.0], 2),
        ];
        let g = gradient(&s, &ParamVector::zeros(s.param_count()), &batch).unwrap();
        let bias_sum: f64 = g.as_slice()[6..].iter().sum();
        assert!(bias_sum.abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let s = ModelSpec::mlp(3, 4, 3);
        let theta = random_params(&s, 0.5, 9);
        let batch = random_batch(&s, 8, 10);
        let doubled: Vec<_> = batch.iter().chain(batch.iter()).cloned().collect();
        let a = gradient(&s, &theta, &batch).unwrap();
        let b = gradient(&s, &theta, &doubled).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for spec in [ModelSpec::softmax(4, 3), ModelSpec::mlp(4, 5, 3)] {
            let theta = random_params(&spec, 0.8, 42);
            let batch = random_batch(&spec, 6, 43);
            let g = gradient(&spec, &theta, &batch).unwrap();
            for i in 0..theta.len() {
                let fd = finite_difference(&spec, &theta, &batch, i);
                let err = (g.as_slice()[i] - fd).abs() / fd.abs().max(g.as_slice()[i].abs()).max(1e-6);
                assert!(err < 1e-4, "coord {i}: {} vs {fd}", g.as_slice()[i]);
            }
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let s = ModelSpec::mlp(3, 4, 2);
        let theta0 = random_params(&s, 0.3, 5);
        let data = random_batch(&s, 20, 6);
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            batch_size: 4,
            shuffle_seed: 1,
        };
        assert_eq!(local_train(&s, &theta0, &data, &cfg).unwrap(), theta0);
    }

    #[test]
    fn single_full_batch_epoch_is_one_step() {
        let s = ModelSpec::softmax(3, 3);
        let theta0 = random_params(&s, 0.3, 5);
        let data = random_batch(&s, 20, 6);
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.3,
            batch_size: 50,
            shuffle_seed: 1,
        };
        let trained = local_train(&s, &theta0, &data, &cfg).unwrap();
        let mut expected = theta0.clone();
        expected.axpy(-0.3, &gradient(&s, &theta0, &data).unwrap());
        assert_eq!(trained, expected);
    }

    #[test]
    fn training_reduces_loss_on_separable_data() {
        let s = ModelSpec::softmax(2, 2);
        let data: Vec<_> = (0..40)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 0 { -1.0 } else { 1.0 };
                LabeledExample::new(vec![sign * (1.0 + i as f64 * 0.01), 0.5], label)
            })
            .collect();
        let theta0 = init_params(&s, 3);
        let cfg = TrainConfig {
            epochs: 20,
            learning_rate: 0.1,
            batch_size: 8,
            shuffle_seed: 2,
        };
        let theta = local_train(&s, &theta0, &data, &cfg).unwrap();
        let before = forward_loss(&s, &theta0, &data).unwrap();
        let after = forward_loss(&s, &theta, &data).unwrap();
        assert!(after < before, "{after} !< {before}");
        assert_eq!(evaluate(&s, &theta, &data).unwrap().accuracy, 1.0);
    }

    #[test]
    fn divergence_is_reported() {
        let s = ModelSpec::softmax(1, 2);
        // init weights favour class 0 for x > 0, so these labels are badly misfit
        let data = vec![
            LabeledExample::new(vec![1e300], 1),
            LabeledExample::new(vec![-1e300], 0),
        ];
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 1e300,
            batch_size: 2,
            shuffle_seed: 0,
        };
        let err = local_train(&s, &init_params(&s, 0), &data, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn ties_break_to_class_zero() {
        let s = ModelSpec::softmax(2, 2);
        let data = vec![
            LabeledExample::new(vec![1.0, 2.0], 0),
            LabeledExample::new(vec![3.0, 1.0], 1),
            LabeledExample::new(vec![0.0, 1.0], 1),
            LabeledExample::new(vec![1.0, 1.0], 0),
        ];
        let e = evaluate(&s, &ParamVector::zeros(6), &data).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert!((e.loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn random_model_accuracy_near_chance() {
        // 10 balanced classes: a random model sits around 10% accuracy.
        let s = ModelSpec::softmax(8, 10);
        let mut accs = Vec::new();
        for seed in 0..20 {
            let theta = random_params(&s, 0.5, seed);
            let mut data = random_batch(&s, 1000, 1000 + seed);
            for (i, ex) in data.iter_mut().enumerate() {
                ex.label = i % 10;
            }
            accs.push(evaluate(&s, &theta, &data).unwrap().accuracy);
        }
        let inside = accs.iter().filter(|a| (0.05..=0.20).contains(*a)).count();
        assert!(inside >= 19, "{accs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn probabilities_sum_to_one(seed in 0u64..10_000, mlp in any::<bool>()) {
            let spec = if mlp { ModelSpec::mlp(4, 3, 5) } else { ModelSpec::softmax(4, 5) };
            let theta = random_params(&spec, 3.0, seed);
            let x = random_batch(&spec, 1, seed + 1).remove(0).features;
            let p = predict_proba(&spec, &theta, &x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn training_is_deterministic(seed in 0u64..1000) {
            let spec = ModelSpec::mlp(3, 4, 3);
            let theta0 = init_params(&spec, seed);
            let data = random_batch(&spec, 25, seed);
            let cfg = TrainConfig { epochs: 3, learning_rate: 0.2, batch_size: 4, shuffle_seed: seed };
            let a = local_train(&spec, &theta0, &data, &cfg).unwrap();
            let b = local_train(&spec, &theta0, &data, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn evaluation_is_bounded(seed in 0u64..1000) {
            let spec = ModelSpec::softmax(3, 4);
            let theta = random_params(&spec, 2.0, seed);
            let e = evaluate(&spec, &theta, &random_batch(&spec, 30, seed)).unwrap();
            prop_assert!((0.0..=1.0).contains(&e.accuracy));
            prop_assert!(e.loss >= 0.0);
        }
    }
}
