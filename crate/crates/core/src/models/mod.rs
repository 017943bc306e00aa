//! Target model families (BLR, MLR, MLP, decision tree), their trainers,
//! and prediction entry points shared by every attack in the crate.

pub mod blr;
mod gd;
pub mod mlp;
pub mod mlr;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blr::{train_blr, train_blr_weighted, BlrHyper, BlrModel};
pub use mlp::{train_mlp, MlpHyper, MlpModel};
pub use mlr::{train_mlr, MlrHyper, MlrModel};
pub(crate) use mlp::fit_mlp;
pub(crate) use mlr::fit_mlr;
pub use tree::{
    train_tree, train_tree_weighted, tree_traverse_partial, DecisionTree, NodeKind, SplitTest,
    TraversalStop, TreeHyper, TreeNode,
};

/// Logistic sigmoid 1/(1+e^-t), computed in the branch that avoids
/// overflow so it saturates cleanly at the extremes.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^t) without overflow; the building block of stable
/// cross-entropy losses.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else if t < -30.0 {
        t.exp()
    } else {
        (1.0 + t.exp()).ln()
    }
}

/// Softmax with the usual max-shift for stability.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties break to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate().skip(1) {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

/// Any of the four model families, tagged for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "snake_case")]
pub enum TargetModel {
    Blr(BlrModel),
    Mlr(MlrModel),
    Mlp(MlpModel),
    Tree(DecisionTree),
}

impl TargetModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TargetModel::Blr(_) => "blr",
            TargetModel::Mlr(_) => "mlr",
            TargetModel::Mlp(_) => "mlp",
            TargetModel::Tree(_) => "tree",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetModel::Blr(m) => m.w.len(),
            TargetModel::Mlr(m) => m.w.first().map_or(0, Vec::len),
            TargetModel::Mlp(m) => m.dim(),
            TargetModel::Tree(t) => t.d,
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            TargetModel::Blr(_) => 2,
            TargetModel::Mlr(m) => m.w.len(),
            TargetModel::Mlp(m) => m.class_count(),
            TargetModel::Tree(t) => t.c,
        }
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Class distribution at `x` (sums to 1 within 1e-12).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok(match self {
            TargetModel::Blr(m) => {
                let p = m.positive_proba(x);
                vec![1.0 - p, p]
            }
            TargetModel::Mlr(m) => m.proba(x),
            TargetModel::Mlp(m) => m.proba(x),
            TargetModel::Tree(t) => t.leaf_distribution(x),
        })
    }

    /// Argmax of `predict_proba`, ties to the lowest class index.
    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}
