//! Linear probes: l2-regularized logistic regression on projected step
//! embeddings, trained by full-batch gradient descent.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::trace::{LabelKind, TraceSet};

pub type ProbeKind = LabelKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Inverse-frequency example weights so both classes carry equal mass.
    pub balance_classes: bool,
    /// Optimize on per-feature standardized inputs, then fold the scaling
    /// back into the returned weights.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
            balance_classes: true,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub config: TrainConfig,
    pub examples: usize,
    pub positives: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub kind: ProbeKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Identifier of the PCA model whose projections this probe consumes.
    pub pca_ref: String,
    pub train_meta: TrainMeta,
}

impl ProbeModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }
}

/// `sigmoid(w . x + b)` for an already-projected embedding.
pub fn score_step(probe: &ProbeModel, x: &[f64]) -> Result<f64> {
    probe.logit(x).map(sigmoid)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted mean logistic loss plus `l2 * |w|^2 / 2` (bias unpenalized).
#[derive(Debug, Clone, Copy)]
pub struct LogisticObjective<'a> {
    /// Row-major `n x dim`.
    pub features: &'a [f64],
    pub dim: usize,
    pub targets: &'a [bool],
    pub sample_weights: &'a [f64],
    pub l2: f64,
}

impl LogisticObjective<'_> {
    pub fn loss(&self, w: &[f64], b: f64) -> f64 {
        self.evaluate(w, b, None)
    }

    /// Returns `(loss, dL/dw, dL/db)`.
    pub fn loss_and_gradient(&self, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
        let mut grad = vec![0.0; self.dim];
        let mut grad_b = 0.0;
        let loss = self.evaluate(w, b, Some((&mut grad, &mut grad_b)));
        (loss, grad, grad_b)
    }

    fn evaluate(&self, w: &[f64], b: f64, mut grad: Option<(&mut Vec<f64>, &mut f64)>) -> f64 {
        let total_weight: f64 = self.sample_weights.iter().sum();
        let mut loss = 0.0;
        for ((row, &y), &s) in self
            .features
            .chunks_exact(self.dim)
            .zip(self.targets)
            .zip(self.sample_weights)
        {
            let z = dot(w, row) + b;
            let yf = if y { 1.0 } else { 0.0 };
            loss += s * (softplus(z) - yf * z);
            if let Some((gw, gb)) = grad.as_mut() {
                let r = s * (sigmoid(z) - yf);
                for (g, x) in gw.iter_mut().zip(row) {
                    *g += r * x;
                }
                **gb += r;
            }
        }
        loss /= total_weight;
        if let Some((gw, gb)) = grad {
            for (g, wi) in gw.iter_mut().zip(w) {
                *g = *g / total_weight + self.l2 * wi;
            }
            *gb /= total_weight;
        }
        loss + 0.5 * self.l2 * dot(w, w)
    }
}

/// Result of [`fit_logistic`]: weights in the caller's feature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Gradient descent from `w = 0, b = 0`. A step that would increase the
/// objective is retried at half the step size, so the loss never rises.
pub fn fit_logistic(
    features: &[f64],
    dim: usize,
    targets: &[bool],
    config: &TrainConfig,
) -> Result<LogisticFit> {
    let n = targets.len();
    if features.len() != n * dim {
        return Err(Error::invalid("feature matrix shape does not match targets"));
    }
    if config.learning_rate.is_nan() || config.learning_rate <= 0.0 || config.l2.is_nan() || config.l2 < 0.0 {
        return Err(Error::invalid("learning rate must be > 0 and l2 >= 0"));
    }
    let positives = targets.iter().filter(|&&y| y).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels(format!(
            "{positives} positives among {n} examples"
        )));
    }

    let sample_weights: Vec<f64> = if config.balance_classes {
        let pos_w = n as f64 / (2.0 * positives as f64);
        let neg_w = n as f64 / (2.0 * (n - positives) as f64);
        targets.iter().map(|&y| if y { pos_w } else { neg_w }).collect()
    } else {
        vec![1.0; n]
    };

    let (shift, scale) = if config.standardize {
        feature_moments(features, dim)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    let standardized: Vec<f64>;
    let train_features = if config.standardize {
        standardized = features
            .chunks_exact(dim)
            .flat_map(|row| {
                row.iter()
                    .zip(&shift)
                    .zip(&scale)
                    .map(|((x, m), s)| if *s > 0.0 { (x - m) / s } else { 0.0 })
            })
            .collect();
        &standardized[..]
    } else {
        features
    };

    let objective = LogisticObjective {
        features: train_features,
        dim,
        targets,
        sample_weights: &sample_weights,
        l2: config.l2,
    };

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut loss, mut grad, mut grad_b) = objective.loss_and_gradient(&w, b);
    let initial_loss = loss;
    let mut lr = config.learning_rate;
    let mut trial = vec![0.0; dim];
    'epochs: for _ in 0..config.epochs {
        loop {
            for ((t, wi), g) in trial.iter_mut().zip(&w).zip(&grad) {
                *t = wi - lr * g;
            }
            let trial_b = b - lr * grad_b;
            let (trial_loss, trial_grad, trial_grad_b) =
                objective.loss_and_gradient(&trial, trial_b);
            if trial_loss <= loss {
                core::mem::swap(&mut w, &mut trial);
                b = trial_b;
                loss = trial_loss;
                grad = trial_grad;
                grad_b = trial_grad_b;
                break;
            }
            lr *= 0.5;
            if lr < config.learning_rate * 1e-12 {
                break 'epochs;
            }
        }
    }

    // Fold the standardization back: w.((x - m)/s) + b = (w/s).x + (b - sum w m / s).
    let mut bias = b;
    let weights: Vec<f64> = w
        .iter()
        .zip(&shift)
        .zip(&scale)
        .map(|((wi, m), s)| {
            if *s > 0.0 {
                bias -= wi * m / s;
                wi / s
            } else {
                0.0
            }
        })
        .collect();

    Ok(LogisticFit {
        weights,
        bias,
        initial_loss,
        final_loss: loss,
    })
}

/// Per-feature mean and standard deviation. Features whose spread is at
/// rounding level get scale 0 and are dropped from the fit.
fn feature_moments(features: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (features.len() / dim.max(1)) as f64;
    let mut mean = vec![0.0; dim];
    for row in features.chunks_exact(dim) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in features.chunks_exact(dim) {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let sd = libm::sqrt(v / n);
            if sd > 1e-12 * (1.0 + m.abs()) {
                sd
            } else {
                0.0
            }
        })
        .collect();
    (mean, scale)
}

/// Projects every labeled training step and fits a probe for `kind`.
pub fn train_probe(
    kind: ProbeKind,
    train: &TraceSet,
    pca: &PcaModel,
    pca_ref: &str,
    config: &TrainConfig,
) -> Result<ProbeModel> {
    if train.dimension() != pca.input_dim() && !train.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: pca.input_dim(),
            got: train.dimension(),
        });
    }
    let dim = pca.output_dim();
    let mut features = Vec::with_capacity(train.step_count() * dim);
    let mut targets = Vec::with_capacity(train.step_count());
    for trace in train.traces() {
        for (i, step) in trace.steps.iter().enumerate() {
            targets.push(trace.label(kind, i)?);
            features.extend(pca.project(&step.embedding)?);
        }
    }
    let fit = fit_logistic(&features, dim, &targets, config)?;
    Ok(ProbeModel {
        kind,
        weights: fit.weights,
        bias: fit.bias,
        pca_ref: String::from(pca_ref),
        train_meta: TrainMeta {
            config: *config,
            examples: targets.len(),
            positives: targets.iter().filter(|&&y| y).count(),
            initial_loss: fit.initial_loss,
            final_loss: fit.final_loss,
        },
    })
}
