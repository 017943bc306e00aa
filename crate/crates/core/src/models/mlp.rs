//! One-hidden-layer perceptron: logistic hidden units, softmax output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::feature::dot;
use crate::models::gd::{descend, GdConfig};
use crate::models::{sigmoid, softmax};
use crate::rng::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// h rows of d weights.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// c rows of h weights.
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    pub fn dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden_count(&self) -> usize {
        self.w1.len()
    }

    pub fn class_count(&self) -> usize {
        self.w2.len()
    }

    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| sigmoid(dot(row, x) + b))
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let a = self.hidden(x);
        self.w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &a) + b)
            .collect()
    }

    pub fn proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpHyper {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Initialization seed.
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            hidden: 8,
            lr: 0.5,
            epochs: 800,
            l2: 1e-4,
            seed: 0,
        }
    }
}

struct Dims {
    d: usize,
    h: usize,
    c: usize,
}

impl Dims {
    fn n_params(&self) -> usize {
        self.h * self.d + self.h + self.c * self.h + self.c
    }

    fn unpack(&self, params: &[f64]) -> MlpModel {
        let (d, h, c) = (self.d, self.h, self.c);
        let mut at = 0;
        let w1: Vec<Vec<f64>> = (0..h)
            .map(|i| params[at + i * d..at + (i + 1) * d].to_vec())
            .collect();
        at += h * d;
        let b1 = params[at..at + h].to_vec();
        at += h;
        let w2: Vec<Vec<f64>> = (0..c)
            .map(|k| params[at + k * h..at + (k + 1) * h].to_vec())
            .collect();
        at += c * h;
        let b2 = params[at..at + c].to_vec();
        MlpModel { w1, b1, w2, b2 }
    }
}

/// Weighted cross-entropy over the packed parameter vector
/// [w1 | b1 | w2 | b2], with L2 on both weight blocks.
pub(crate) fn mlp_objective(
    params: &[f64],
    points: &[Vec<f64>],
    targets: &[Vec<f64>],
    d: usize,
    h: usize,
    c: usize,
    l2: f64,
    weights: &[f64],
) -> (f64, Vec<f64>) {
    let total_w: f64 = weights.iter().sum();
    let (w1_at, b1_at, w2_at, b2_at) = (0, h * d, h * d + h, h * d + h + c * h);
    let mut loss = 0.0;
    let mut grad = vec![0.0; b2_at + c];
    for ((x, t), &wt) in points.iter().zip(targets).zip(weights) {
        let a: Vec<f64> = (0..h)
            .map(|i| sigmoid(dot(&params[w1_at + i * d..w1_at + (i + 1) * d], x) + params[b1_at + i]))
            .collect();
        let logits: Vec<f64> = (0..c)
            .map(|k| dot(&params[w2_at + k * h..w2_at + (k + 1) * h], &a) + params[b2_at + k])
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln() + m;

        let mut da = vec![0.0; h];
        for k in 0..c {
            loss -= wt * t[k] * (logits[k] - log_z);
            let dz = wt * ((logits[k] - log_z).exp() - t[k]);
            for i in 0..h {
                grad[w2_at + k * h + i] += dz * a[i];
                da[i] += dz * params[w2_at + k * h + i];
            }
            grad[b2_at + k] += dz;
        }
        for i in 0..h {
            let dpre = da[i] * a[i] * (1.0 - a[i]);
            for (g, xi) in grad[w1_at + i * d..w1_at + (i + 1) * d].iter_mut().zip(x) {
                *g += dpre * xi;
            }
            grad[b1_at + i] += dpre;
        }
    }
    loss /= total_w;
    for g in grad.iter_mut() {
        *g /= total_w;
    }
    // L2 on weights, not biases
    for (g, p) in grad[w1_at..b1_at].iter_mut().zip(&params[w1_at..b1_at]) {
        *g += l2 * p;
    }
    for (g, p) in grad[w2_at..b2_at].iter_mut().zip(&params[w2_at..b2_at]) {
        *g += l2 * p;
    }
    loss += 0.5
        * l2
        * (dot(&params[w1_at..b1_at], &params[w1_at..b1_at])
            + dot(&params[w2_at..b2_at], &params[w2_at..b2_at]));
    (loss, grad)
}

/// Cross-entropy gradient descent from a seeded 1/sqrt(fan-in) init.
pub fn train_mlp(train: &LabeledDataset, hyper: &MlpHyper) -> Result<MlpModel> {
    if train.c < 2 {
        return Err(Error::WrongClassCount(format!(
            "need c>=2, dataset has c={}",
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
    fit_mlp(&train.points, &targets, train.d, train.c, hyper, None)
}

/// Fits an MLP to arbitrary target distributions; used by both the
/// trainer (one-hot) and the extraction attack (observed confidences).
pub(crate) fn fit_mlp(
    points: &[Vec<f64>],
    targets: &[Vec<f64>],
    d: usize,
    c: usize,
    hyper: &MlpHyper,
    weights: Option<&[f64]>,
) -> Result<MlpModel> {
    if hyper.hidden == 0 {
        return Err(Error::InvalidHyper("hidden unit count must be >= 1".into()));
    }
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
    let dims = Dims {
        d,
        h: hyper.hidden,
        c,
    };
    let mut r = rng(hyper.seed);
    let mut params0 = vec![0.0; dims.n_params()];
    let in_scale = 1.0 / (d as f64).sqrt();
    let hid_scale = 1.0 / (hyper.hidden as f64).sqrt();
    for p in params0[..dims.h * d].iter_mut() {
        *p = r.gen_range(-1.0..1.0) * in_scale;
    }
    let w2_at = dims.h * d + dims.h;
    for p in params0[w2_at..w2_at + c * dims.h].iter_mut() {
        *p = r.gen_range(-1.0..1.0) * hid_scale;
    }

    let cfg = GdConfig {
        lr: hyper.lr,
        epochs: hyper.epochs,
        tol: 1e-9,
    };
    let (params, _) = descend(params0, &cfg, |p| {
        mlp_objective(p, points, targets, d, dims.h, c, hyper.l2, weights)
    });
    Ok(dims.unpack(&params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_gaussian_blobs;
    use crate::models::TargetModel;

    #[test]
    fn twenty_hidden_units_fit_two_blobs() {
        let ds = gen_gaussian_blobs(31, 80, 2, 2, 0.8).unwrap();
        let hyper = MlpHyper {
            hidden: 20,
            ..MlpHyper::default()
        };
        let m = TargetModel::Mlp(train_mlp(&ds, &hyper).unwrap());
        let hits = ds
            .points
            .iter()
            .zip(&ds.labels)
            .filter(|(x, &y)| m.predict_label(x).unwrap() == y)
            .count();
        assert!(hits as f64 / ds.points.len() as f64 >= 0.9);
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = gen_gaussian_blobs(5, 40, 2, 2, 0.7).unwrap();
        let a = train_mlp(&ds, &MlpHyper::default()).unwrap();
        let b = train_mlp(&ds, &MlpHyper::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_zero_hidden_units() {
        let ds = gen_gaussian_blobs(5, 10, 2, 2, 0.7).unwrap();
        let hyper = MlpHyper {
            hidden: 0,
            ..MlpHyper::default()
        };
        assert!(matches!(train_mlp(&ds, &hyper), Err(Error::InvalidHyper(_))));
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (d, h, c, l2) = (3, 4, 2, 0.01);
        let points = crate::rng::uniform_points(17, 5, d);
        let targets = vec![
            vec![1.0, 0.0],
            vec![0.3, 0.7],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.9, 0.1],
        ];
        let weights = vec![1.0; points.len()];
        let n = h * d + h + c * h + c;
        let params: Vec<f64> = crate::rng::uniform_points(23, 1, n)[0]
            .iter()
            .map(|v| 2.0 * (v - 0.5))
            .collect();
        let (_, g) = mlp_objective(&params, &points, &targets, d, h, c, l2, &weights);
        let step = 1e-5;
        for i in 0..n {
            let mut up = params.clone();
            let mut dn = params.clone();
            up[i] += step;
            dn[i] -= step;
            let lu = mlp_objective(&up, &points, &targets, d, h, c, l2, &weights).0;
            let ld = mlp_objective(&dn, &points, &targets, d, h, c, l2, &weights).0;
            let fd = (lu - ld) / (2.0 * step);
            assert!(
                (fd - g[i]).abs() <= 1e-4 * fd.abs().max(g[i].abs()).max(1.0),
                "param {i}: fd={fd}, analytic={}",
                g[i]
            );
        }
    }
}
