//! Multinomial logistic regression: softmax over c per-class linear scores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::feature::dot;
use crate::models::gd::{descend, GdConfig};
use crate::models::softmax;
use crate::rng::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrModel {
    /// c rows of d weights.
    pub w: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

impl MlrModel {
    pub fn dim(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn class_count(&self) -> usize {
        self.w.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.beta)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }

    pub fn proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlrHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Initialization seed.
    pub seed: u64,
}

impl Default for MlrHyper {
    fn default() -> Self {
        MlrHyper {
            lr: 0.5,
            epochs: 600,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Weighted softmax cross-entropy with L2 on the weight block.
/// Parameter layout: c*d weights row-major, then c biases.
pub(crate) fn mlr_objective(
    params: &[f64],
    points: &[Vec<f64>],
    targets: &[Vec<f64>],
    d: usize,
    c: usize,
    l2: f64,
    weights: &[f64],
) -> (f64, Vec<f64>) {
    let total_w: f64 = weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; c * d + c];
    for ((x, t), &wt) in points.iter().zip(targets).zip(weights) {
        let logits: Vec<f64> = (0..c)
            .map(|k| dot(&params[k * d..(k + 1) * d], x) + params[c * d + k])
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln() + m;
        for k in 0..c {
            loss -= wt * t[k] * (logits[k] - log_z);
            let err = wt * ((logits[k] - log_z).exp() - t[k]);
            for (g, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *g += err * xi;
            }
            grad[c * d + k] += err;
        }
    }
    loss /= total_w;
    for g in grad.iter_mut() {
        *g /= total_w;
    }
    for (g, p) in grad[..c * d].iter_mut().zip(&params[..c * d]) {
        *g += l2 * p;
    }
    loss += 0.5 * l2 * dot(&params[..c * d], &params[..c * d]);
    (loss, grad)
}

/// Softmax cross-entropy gradient descent; c > 2 (binary belongs to BLR).
pub fn train_mlr(train: &LabeledDataset, hyper: &MlrHyper) -> Result<MlrModel> {
    if train.c <= 2 {
        return Err(Error::WrongClassCount(format!(
            "multinomial trainer needs c>2, dataset has c={}",
            train.c
        )));
    }
    let targets: Vec<Vec<f64>> = train
        .labels
        .iter()
        .map(|&y| {
            let mut t = vec![0.0; train.c];
            t[y] = 1.0;
            t
        })
        .collect();
    fit_mlr(&train.points, &targets, train.d, train.c, hyper, None)
}

/// Fits an MLR to arbitrary target distributions (one-hot for training,
/// observed confidence vectors for extraction). Optional per-sample weights.
pub(crate) fn fit_mlr(
    points: &[Vec<f64>],
    targets: &[Vec<f64>],
    d: usize,
    c: usize,
    hyper: &MlrHyper,
    weights: Option<&[f64]>,
) -> Result<MlrModel> {
    if !(hyper.lr > 0.0) || hyper.epochs == 0 || hyper.l2 < 0.0 {
        return Err(Error::InvalidHyper(format!(
            "lr={}, epochs={}, l2={}",
            hyper.lr, hyper.epochs, hyper.l2
        )));
    }
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let owned;
    let weights = match weights {
        Some(w) => w,
        None => {
            owned = vec![1.0; points.len()];
            &owned
        }
    };
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidArgument("total sample weight is 0".into()));
    }

    let mut r = rng(hyper.seed);
    let scale = 1.0 / (d as f64).sqrt();
    let mut params0 = vec![0.0; c * d + c];
    for p in params0[..c * d].iter_mut() {
        *p = r.gen_range(-1.0..1.0) * scale;
    }

    let cfg = GdConfig {
        lr: hyper.lr,
        epochs: hyper.epochs,
        tol: 1e-9,
    };
    let (params, _) = descend(params0, &cfg, |p| {
        mlr_objective(p, points, targets, d, c, hyper.l2, weights)
    });
    Ok(MlrModel {
        w: (0..c).map(|k| params[k * d..(k + 1) * d].to_vec()).collect(),
        beta: params[c * d..].to_vec(),
    })
}
