//! Multinomial logistic regression. Weights are laid out class by class,
//! `feature_dim` coefficients followed by the bias.

use serde::{Deserialize, Serialize};

use super::data::{argmax, Dataset};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub weights: Vec<f64>,
    pub round: usize,
}

impl GlobalModel {
    pub fn zeros(n_params: usize) -> Self {
        Self {
            weights: vec![0.0; n_params],
            round: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClientState<'a> {
    pub id: usize,
    pub data: &'a Dataset,
    pub classes: usize,
    pub lr: f64,
    pub epochs: usize,
}

fn check_dims(weights: &[f64], data: &Dataset, classes: usize) -> Result<()> {
    let expected = (data.feature_dim + 1) * classes;
    if weights.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: weights.len(),
        });
    }
    Ok(())
}

fn logits(weights: &[f64], x: &[f64], classes: usize, out: &mut [f64]) {
    let f = x.len();
    for c in 0..classes {
        let w = &weights[c * (f + 1)..(c + 1) * (f + 1)];
        out[c] = w[f] + w[..f].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// In-place softmax; returns `log Σ exp`.
fn softmax(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter_mut().map(|v| {
        *v = (*v - max).exp();
        *v
    }).sum();
    z.iter_mut().for_each(|v| *v /= sum);
    max + sum.ln()
}

/// Mean softmax cross-entropy and its gradient.
pub fn loss_and_grad(weights: &[f64], data: &Dataset, classes: usize) -> Result<(f64, Vec<f64>)> {
    check_dims(weights, data, classes)?;
    if data.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let f = data.feature_dim;
    let mut grad = vec![0.0; weights.len()];
    let mut z = vec![0.0; classes];
    let mut loss = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let y = data.labels[i];
        logits(weights, x, classes, &mut z);
        let zy = z[y];
        loss += softmax(&mut z) - zy;
        for c in 0..classes {
            let r = z[c] - f64::from(u8::from(c == y));
            let g = &mut grad[c * (f + 1)..(c + 1) * (f + 1)];
            g[..f].iter_mut().zip(x).for_each(|(gv, xv)| *gv += r * xv);
            g[f] += r;
        }
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Full-batch gradient descent from the global weights. Fails if the loss
/// becomes non-finite.
pub fn local_train(client: &ClientState<'_>, global: &GlobalModel) -> Result<Vec<f64>> {
    let mut w = global.weights.clone();
    check_dims(&w, client.data, client.classes)?;
    for step in 0..client.epochs {
        let (loss, grad) = loss_and_grad(&w, client.data, client.classes)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step });
        }
        w.iter_mut().zip(&grad).for_each(|(wv, g)| *wv -= client.lr * g);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { step: client.epochs });
    }
    Ok(w)
}

pub fn predict(weights: &[f64], data: &Dataset, classes: usize) -> Result<Vec<usize>> {
    check_dims(weights, data, classes)?;
    let mut z = vec![0.0; classes];
    Ok((0..data.len())
        .map(|i| {
            logits(weights, data.row(i), classes, &mut z);
            argmax(&z)
        })
        .collect())
}

/// Accuracy and macro F1 from paired labels. Every class counts toward the
/// macro average; a class with no true or predicted samples scores 0.
pub fn classification_metrics(pred: &[usize], truth: &[usize], classes: usize) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fnn = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnn[t] += 1;
        }
    }
    let correct: usize = tp.iter().sum();
    let f1: f64 = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fnn[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum::<f64>()
        / classes as f64;
    Ok((correct as f64 / truth.len() as f64, f1))
}

/// Test accuracy and macro F1 of `weights`.
pub fn evaluate(weights: &[f64], test: &Dataset, classes: usize) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    classification_metrics(&predict(weights, test, classes)?, &test.labels, classes)
}

/// Dataset-size-weighted mean of client weight vectors.
pub fn fedavg_aggregate(vectors: &[Vec<f64>], sizes: &[usize]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::NoClients)?;
    if sizes.len() != vectors.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            actual: sizes.len(),
        });
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Config("client sizes sum to zero".into()));
    }
    let mut out = vec![0.0; first.len()];
    for (v, &s) in vectors.iter().zip(sizes) {
        if v.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                actual: v.len(),
            });
        }
        let w = s as f64 / total as f64;
        out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

/// Mean over clients and parameters of the squared deviation of each
/// client's update from the mean update.
pub fn gradient_variance(updates: &[Vec<f64>]) -> f64 {
    let Some(first) = updates.first() else {
        return 0.0;
    };
    let n = updates.len() as f64;
    let p = first.len();
    if p == 0 {
        return 0.0;
    }
    (0..p)
        .map(|j| {
            let mean = updates.iter().map(|u| u[j]).sum::<f64>() / n;
            updates.iter().map(|u| (u[j] - mean).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / (n * p as f64)
}
