//! Binary logistic regression: p(y=1|x) = sigmoid(w.x + beta).

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::feature::dot;
use crate::models::gd::{descend, GdConfig};
use crate::models::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlrModel {
    pub w: Vec<f64>,
    pub beta: f64,
}

impl BlrModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.beta
    }

    /// Probability of the positive class (label 1).
    pub fn positive_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlrHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for BlrHyper {
    fn default() -> Self {
        BlrHyper {
            lr: 0.5,
            epochs: 400,
            l2: 1e-4,
        }
    }
}

fn check_hyper(lr: f64, epochs: usize, l2: f64) -> Result<()> {
    if !(lr > 0.0) || epochs == 0 || l2 < 0.0 {
        return Err(Error::InvalidHyper(format!(
            "lr={lr}, epochs={epochs}, l2={l2}"
        )));
    }
    Ok(())
}

/// Full-batch gradient descent on L2-penalized logistic loss.
pub fn train_blr(train: &LabeledDataset, hyper: &BlrHyper) -> Result<BlrModel> {
    if train.c != 2 {
        return Err(Error::WrongClassCount(format!(
            "binary trainer needs c=2, dataset has c={}",
            train.c
        )));
    }
    let weights = vec![1.0; train.points.len()];
    train_blr_weighted(&train.points, &train.labels, &weights, train.d, hyper)
}

/// Weighted variant used by the self-training defender; per-sample
/// weights scale each point's loss contribution.
pub fn train_blr_weighted(
    points: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    d: usize,
    hyper: &BlrHyper,
) -> Result<BlrModel> {
    check_hyper(hyper.lr, hyper.epochs, hyper.l2)?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if points.len() != labels.len() || points.len() != weights.len() {
        return Err(Error::InvalidArgument(
            "points, labels, weights must have equal length".into(),
        ));
    }
    let total_w: f64 = weights.iter().sum();
    if !(total_w > 0.0) {
        return Err(Error::InvalidArgument("total sample weight is 0".into()));
    }
    let l2 = hyper.l2;
    let loss_grad = |params: &[f64]| {
        let (w, beta) = (&params[..d], params[d]);
        let mut loss = 0.0;
        let mut grad = vec![0.0; d + 1];
        for ((x, &y), &wt) in points.iter().zip(labels).zip(weights) {
            let z = dot(w, x) + beta;
            // softplus(-z) = -ln sigmoid(z); softplus(z) = -ln(1-sigmoid(z))
            loss += wt * if y == 1 { softplus(-z) } else { softplus(z) };
            let err = wt * (sigmoid(z) - y as f64);
            for (g, xi) in grad[..d].iter_mut().zip(x) {
                *g += err * xi;
            }
            grad[d] += err;
        }
        loss /= total_w;
        for g in grad.iter_mut() {
            *g /= total_w;
        }
        for (g, wi) in grad[..d].iter_mut().zip(w) {
            *g += l2 * wi;
        }
        loss += 0.5 * l2 * dot(w, w);
        (loss, grad)
    };
    let cfg = GdConfig {
        lr: hyper.lr,
        epochs: hyper.epochs,
        tol: 1e-9,
    };
    let (params, _) = descend(vec![0.0; d + 1], &cfg, loss_grad);
    Ok(BlrModel {
        w: params[..d].to_vec(),
        beta: params[d],
    })
}
