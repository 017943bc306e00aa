//! Feature vectors over the box domain [0,1]^d, plus the partially
//! specified variant used by the tree-id oracle.

use serde::{Deserialize, Serialize};

/// A fully specified point in [0,1]^d.
pub type FeatureVector = Vec<f64>;

/// A feature vector in which some coordinates are unspecified.
///
/// The tree-id oracle descends a decision tree until it reaches a node
/// whose split feature is unspecified, so partial vectors are how an
/// attacker walks a tree one layer at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialFeatureVector(pub Vec<Option<f64>>);

impl PartialFeatureVector {
    /// All coordinates unspecified.
    pub fn unspecified(d: usize) -> Self {
        PartialFeatureVector(vec![None; d])
    }

    /// Every coordinate specified.
    pub fn complete(x: &[f64]) -> Self {
        PartialFeatureVector(x.iter().copied().map(Some).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0[i]
    }

    /// Returns a copy with coordinate `i` set to `v`.
    pub fn with(&self, i: usize, v: f64) -> Self {
        let mut out = self.clone();
        out.0[i] = Some(v);
        out
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(|c| c.is_some())
    }

    /// The plain vector, if every coordinate is specified.
    pub fn as_complete(&self) -> Option<FeatureVector> {
        self.0.iter().copied().collect()
    }
}

/// Squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}
