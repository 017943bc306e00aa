//! Metered black-box query access to a target model.
//!
//! The oracle is the only path between attacker and target: it counts
//! accepted queries against a budget, logs every attempt (rejected ones
//! included, unmetered) with a logical tick for the defender's detector,
//! and optionally degrades confidences with seeded noise and rounding.

pub mod wire;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::PartialFeatureVector;
use crate::models::{tree_traverse_partial, TargetModel};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Label plus the full confidence vector.
    Confidence,
    /// Label only.
    LabelOnly,
    /// Node identifier where traversal stopped; decision trees only.
    TreeId,
}

impl std::fmt::Display for OracleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OracleMode::Confidence => "confidence",
            OracleMode::LabelOnly => "label-only",
            OracleMode::TreeId => "tree-id",
        })
    }
}

impl std::str::FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence" => Ok(OracleMode::Confidence),
            "label-only" => Ok(OracleMode::LabelOnly),
            "tree-id" => Ok(OracleMode::TreeId),
            other => Err(Error::Parse(format!("unknown oracle mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub mode: OracleMode,
    /// Maximum accepted queries; 0 means unlimited.
    pub budget: u64,
    /// Stddev of Gaussian noise added to reported confidences; 0 = exact.
    pub noise_sigma: f64,
    /// Confidences are rounded to this many digits; negative = no rounding.
    pub confidence_decimals: i32,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            mode: OracleMode::Confidence,
            budget: 0,
            noise_sigma: 0.0,
            confidence_decimals: -1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleResponse {
    Confidence { label: usize, conf: Vec<f64> },
    Label { label: usize },
    TreeId { node_id: u64 },
}

impl OracleResponse {
    pub fn label(&self) -> Option<usize> {
        match self {
            OracleResponse::Confidence { label, .. } | OracleResponse::Label { label } => {
                Some(*label)
            }
            OracleResponse::TreeId { .. } => None,
        }
    }

    pub fn confidences(&self) -> Option<&[f64]> {
        match self {
            OracleResponse::Confidence { conf, .. } => Some(conf),
            _ => None,
        }
    }

    pub fn node_id(&self) -> Option<u64> {
        match self {
            OracleResponse::TreeId { node_id } => Some(*node_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryOutcome {
    Answered { response: OracleResponse },
    /// Attempt arrived after budget exhaustion; seen but unmetered.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// Strictly increasing, gap-free position in the log.
    pub seq: u64,
    /// Logical time; one tick per query unless the clock is advanced.
    pub tick: u64,
    pub source: String,
    pub input: PartialFeatureVector,
    pub outcome: QueryOutcome,
}

/// Common surface of the in-process oracle and the wire client, so attacks
/// run unchanged against either.
pub trait QueryOracle {
    fn query(&mut self, x: &[f64], source: &str) -> Result<OracleResponse>;
    fn query_partial(
        &mut self,
        px: &PartialFeatureVector,
        source: &str,
    ) -> Result<OracleResponse>;
    /// Accepted queries so far, from this handle's point of view.
    fn accepted(&self) -> u64;
}

#[derive(Debug)]
pub struct Oracle {
    model: TargetModel,
    cfg: OracleConfig,
    accepted: u64,
    tick: u64,
    log: Vec<QueryRecord>,
    noise: ChaCha8Rng,
}

pub fn make_oracle(model: TargetModel, cfg: OracleConfig) -> Result<Oracle> {
    if !(cfg.noise_sigma >= 0.0) || !cfg.noise_sigma.is_finite() {
        return Err(Error::ConfigInvalid(format!(
            "noise_sigma {} must be finite and >= 0",
            cfg.noise_sigma
        )));
    }
    if cfg.mode == OracleMode::TreeId && !matches!(model, TargetModel::Tree(_)) {
        return Err(Error::ModeModelMismatch(format!(
            "tree-id mode needs a decision tree, got {}",
            model.kind_name()
        )));
    }
    let noise = rng(cfg.seed);
    Ok(Oracle {
        model,
        cfg,
        accepted: 0,
        tick: 0,
        log: Vec::new(),
        noise,
    })
}

impl Oracle {
    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn log(&self) -> &[QueryRecord] {
        &self.log
    }

    /// Accepted queries remaining, None when unlimited.
    pub fn remaining(&self) -> Option<u64> {
        match self.cfg.budget {
            0 => None,
            b => Some(b.saturating_sub(self.accepted)),
        }
    }

    /// Let logical time pass without a query (idle gaps between probes).
    pub fn advance_ticks(&mut self, n: u64) {
        self.tick += n;
    }

    /// Swap in a retrained model of the same shape; metering and the log
    /// carry on across the swap.
    pub fn replace_model(&mut self, model: TargetModel) -> Result<()> {
        if self.cfg.mode == OracleMode::TreeId && !matches!(model, TargetModel::Tree(_)) {
            return Err(Error::ModeModelMismatch(
                "tree-id mode needs a decision tree".into(),
            ));
        }
        if model.dim() != self.model.dim() || model.class_count() != self.model.class_count() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: model.dim(),
            });
        }
        self.model = model;
        Ok(())
    }

    fn exhausted(&self) -> bool {
        self.cfg.budget > 0 && self.accepted >= self.cfg.budget
    }

    fn append(&mut self, source: &str, input: PartialFeatureVector, outcome: QueryOutcome) {
        self.log.push(QueryRecord {
            seq: self.log.len() as u64,
            tick: self.tick,
            source: source.to_string(),
            input,
            outcome,
        });
        self.tick += 1;
    }

    fn degrade(&mut self, mut conf: Vec<f64>) -> Vec<f64> {
        if self.cfg.noise_sigma > 0.0 {
            for v in conf.iter_mut() {
                let z: f64 = self.noise.sample(StandardNormal);
                *v = (*v + self.cfg.noise_sigma * z).clamp(0.0, 1.0);
            }
            let sum: f64 = conf.iter().sum();
            if sum > 0.0 {
                for v in conf.iter_mut() {
                    *v /= sum;
                }
            } else {
                let uniform = 1.0 / conf.len() as f64;
                conf.fill(uniform);
            }
        }
        let dec = self.cfg.confidence_decimals;
        if (0..=15).contains(&dec) {
            let f = 10f64.powi(dec);
            for v in conf.iter_mut() {
                *v = (*v * f).round() / f;
            }
        }
        conf
    }

    fn answer(&mut self, x: &[f64]) -> Result<OracleResponse> {
        match self.cfg.mode {
            OracleMode::Confidence => {
                let conf = self.model.predict_proba(x)?;
                let label = self.model.predict_label(x)?;
                let conf = self.degrade(conf);
                Ok(OracleResponse::Confidence { label, conf })
            }
            OracleMode::LabelOnly => Ok(OracleResponse::Label {
                label: self.model.predict_label(x)?,
            }),
            OracleMode::TreeId => {
                self.answer_partial(&PartialFeatureVector::complete(x))
            }
        }
    }

    fn answer_partial(&mut self, px: &PartialFeatureVector) -> Result<OracleResponse> {
        let TargetModel::Tree(tree) = &self.model else {
            return Err(Error::WrongMode);
        };
        let stop = tree_traverse_partial(tree, px)?;
        Ok(OracleResponse::TreeId {
            node_id: stop.node_id,
        })
    }
}

impl QueryOracle for Oracle {
    fn query(&mut self, x: &[f64], source: &str) -> Result<OracleResponse> {
        self.model.check_dim(x.len())?;
        if self.exhausted() {
            self.append(source, PartialFeatureVector::complete(x), QueryOutcome::Rejected);
            return Err(Error::BudgetExhausted);
        }
        let response = self.answer(x)?;
        self.accepted += 1;
        self.append(
            source,
            PartialFeatureVector::complete(x),
            QueryOutcome::Answered {
                response: response.clone(),
            },
        );
        Ok(response)
    }

    fn query_partial(
        &mut self,
        px: &PartialFeatureVector,
        source: &str,
    ) -> Result<OracleResponse> {
        if self.cfg.mode != OracleMode::TreeId {
            return Err(Error::WrongMode);
        }
        self.model.check_dim(px.dim())?;
        if self.exhausted() {
            self.append(source, px.clone(), QueryOutcome::Rejected);
            return Err(Error::BudgetExhausted);
        }
        let response = self.answer_partial(px)?;
        self.accepted += 1;
        self.append(
            source,
            px.clone(),
            QueryOutcome::Answered {
                response: response.clone(),
            },
        );
        Ok(response)
    }

    fn accepted(&self) -> u64 {
        self.accepted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_axis_aligned, gen_gaussian_blobs, TreeSpec};
    use crate::models::{train_blr, train_tree, BlrHyper, BlrModel, TreeHyper};
    use crate::rng::uniform_points;

    fn blr_oracle(cfg: OracleConfig) -> Oracle {
        let ds = gen_gaussian_blobs(7, 40, 3, 2, 0.8).unwrap();
        let m = TargetModel::Blr(train_blr(&ds, &BlrHyper::default()).unwrap());
        make_oracle(m, cfg).unwrap()
    }

    fn tree_oracle(cfg: OracleConfig) -> Oracle {
        let ds = gen_gaussian_blobs(7, 40, 2, 2, 0.8).unwrap();
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        make_oracle(TargetModel::Tree(t), cfg).unwrap()
    }

    #[test]
    fn tree_id_mode_requires_a_tree() {
        let ds = gen_gaussian_blobs(7, 10, 2, 2, 0.8).unwrap();
        let m = TargetModel::Blr(train_blr(&ds, &BlrHyper::default()).unwrap());
        let cfg = OracleConfig {
            mode: OracleMode::TreeId,
            ..OracleConfig::default()
        };
        assert!(matches!(
            make_oracle(m, cfg),
            Err(Error::ModeModelMismatch(_))
        ));
    }

    #[test]
    fn zero_budget_means_unlimited() {
        let mut o = blr_oracle(OracleConfig::default());
        for x in uniform_points(1, 100, 3) {
            o.query(&x, "a").unwrap();
        }
        assert_eq!(o.accepted(), 100);
        assert_eq!(o.remaining(), None);
    }

    #[test]
    fn budget_rejections_are_logged_but_unmetered() {
        let mut o = blr_oracle(OracleConfig {
            budget: 2,
            ..OracleConfig::default()
        });
        let x = vec![0.5, 0.5, 0.5];
        o.query(&x, "a").unwrap();
        o.query(&x, "a").unwrap();
        assert!(matches!(o.query(&x, "a"), Err(Error::BudgetExhausted)));
        assert!(matches!(o.query(&x, "a"), Err(Error::BudgetExhausted)));
        assert_eq!(o.accepted(), 2);
        assert_eq!(o.log().len(), 4);
        assert!(matches!(o.log()[2].outcome, QueryOutcome::Rejected));
        let seqs: Vec<u64> = o.log().iter().map(|r| r.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3]);
    }

    #[test]
    fn noiseless_identity_config_reports_exact_probabilities() {
        let mut o = blr_oracle(OracleConfig::default());
        for x in uniform_points(2, 50, 3) {
            let r = o.query(&x, "a").unwrap();
            let expect = o.model().predict_proba(&x).unwrap();
            assert_eq!(r.confidences().unwrap(), expect.as_slice());
            assert_eq!(r.label(), Some(o.model().predict_label(&x).unwrap()));
        }
    }

    #[test]
    fn rounding_to_two_decimals() {
        // w = 0 makes the reported confidence sigmoid(beta) everywhere
        let beta = (0.7341f64 / (1.0 - 0.7341)).ln();
        let m = TargetModel::Blr(BlrModel {
            w: vec![0.0, 0.0],
            beta,
        });
        let mut o = make_oracle(
            m,
            OracleConfig {
                confidence_decimals: 2,
                ..OracleConfig::default()
            },
        )
        .unwrap();
        let r = o.query(&[0.3, 0.4], "a").unwrap();
        assert_eq!(r.confidences().unwrap(), &[0.27, 0.73]);
    }

    #[test]
    fn noise_never_changes_the_label_and_keeps_a_distribution() {
        let mut noisy = blr_oracle(OracleConfig {
            noise_sigma: 0.3,
            seed: 5,
            ..OracleConfig::default()
        });
        for x in uniform_points(3, 200, 3) {
            let r = noisy.query(&x, "a").unwrap();
            assert_eq!(r.label(), Some(noisy.model().predict_label(&x).unwrap()));
            let conf = r.confidences().unwrap();
            assert!((conf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(conf.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn same_seed_same_responses() {
        let cfg = OracleConfig {
            noise_sigma: 0.1,
            confidence_decimals: 3,
            seed: 11,
            ..OracleConfig::default()
        };
        let mut a = blr_oracle(cfg);
        let mut b = blr_oracle(cfg);
        for x in uniform_points(4, 50, 3) {
            assert_eq!(a.query(&x, "s").unwrap(), b.query(&x, "s").unwrap());
        }
    }

    #[test]
    fn partial_queries_walk_the_tree() {
        let cfg = OracleConfig {
            mode: OracleMode::TreeId,
            ..OracleConfig::default()
        };
        let mut o = tree_oracle(cfg);
        let TargetModel::Tree(t) = o.model().clone() else {
            unreachable!()
        };
        let root_id = t.nodes[t.root].id;
        let r = o
            .query_partial(&PartialFeatureVector::unspecified(2), "a")
            .unwrap();
        assert_eq!(r, OracleResponse::TreeId { node_id: root_id });
        let x = [0.3, 0.8];
        let r = o.query(&x, "a").unwrap();
        assert_eq!(r.node_id(), Some(t.leaf_for(&x).unwrap().2));
        assert_eq!(o.accepted(), 2);
    }

    #[test]
    fn partial_queries_need_tree_id_mode() {
        let mut o = blr_oracle(OracleConfig::default());
        let err = o.query_partial(&PartialFeatureVector::unspecified(3), "a");
        assert!(matches!(err, Err(Error::WrongMode)));
        assert_eq!(o.log().len(), 0);
    }

    #[test]
    fn wrong_dimension_is_not_logged_or_metered() {
        let mut o = blr_oracle(OracleConfig::default());
        assert!(matches!(
            o.query(&[0.1], "a"),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(o.accepted(), 0);
        assert!(o.log().is_empty());
    }

    #[test]
    fn ticks_advance_per_query_and_on_demand() {
        let mut o = blr_oracle(OracleConfig::default());
        let x = vec![0.2, 0.2, 0.2];
        o.query(&x, "a").unwrap();
        o.query(&x, "a").unwrap();
        o.advance_ticks(10);
        o.query(&x, "a").unwrap();
        let ticks: Vec<u64> = o.log().iter().map(|r| r.tick).collect();
        assert_eq!(ticks, vec![0, 1, 12]);
        assert_eq!(o.tick(), 13);
    }

    #[test]
    fn replace_model_keeps_meter_and_checks_shape() {
        let mut o = blr_oracle(OracleConfig::default());
        let x = vec![0.9, 0.1, 0.5];
        let before = o.query(&x, "a").unwrap();
        let other_ds = gen_gaussian_blobs(99, 40, 3, 2, 0.6).unwrap();
        let other = TargetModel::Blr(train_blr(&other_ds, &BlrHyper::default()).unwrap());
        o.replace_model(other).unwrap();
        let after = o.query(&x, "a").unwrap();
        assert_ne!(before, after);
        assert_eq!(o.accepted(), 2);
        let (ds2, _) = gen_axis_aligned(3, &TreeSpec { depth: 2, samples_per_leaf: 4 }, 2).unwrap();
        let narrow = TargetModel::Tree(train_tree(&ds2, &TreeHyper::default()).unwrap());
        assert!(o.replace_model(narrow).is_err());
    }

    #[test]
    fn log_records_serialize_with_null_for_unset_coordinates() {
        let cfg = OracleConfig {
            mode: OracleMode::TreeId,
            ..OracleConfig::default()
        };
        let mut o = tree_oracle(cfg);
        let px = PartialFeatureVector(vec![Some(0.25), None]);
        o.query_partial(&px, "probe").unwrap();
        let json = serde_json::to_string(&o.log()[0]).unwrap();
        assert!(json.contains("[0.25,null]"));
        assert!(json.contains("\"source\":\"probe\""));
    }
}
