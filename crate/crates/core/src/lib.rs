//! Adversarial machine learning lab: target models, a metered prediction
//! oracle, extraction / inversion / surrogate attacks, and a kill-chain
//! campaign driver that stages them end to end against a retraining defender.

pub mod campaign;
pub mod datagen;
pub mod error;
pub mod extraction;
pub mod inversion;
pub mod surrogate;
pub mod feature;
pub mod models;
pub mod oracle;
pub mod persist;
pub mod rng;

pub use error::{Error, Result};
pub use feature::{FeatureVector, PartialFeatureVector};
