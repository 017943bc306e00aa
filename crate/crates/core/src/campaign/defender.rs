//! The defended service: scheduled retraining that folds accepted traffic
//! back into the training set, and the drift metric that quantifies how
//! far the served decision boundary has wandered from the original.

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::feature::FeatureVector;
use crate::models::{
    fit_mlp, fit_mlr, train_blr_weighted, train_tree_weighted, BlrHyper, MlpHyper, MlrHyper,
    TargetModel, TreeHyper,
};
use crate::rng::uniform_points;

/// Training recipe the defender re-applies at every retrain epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainerSpec {
    Blr(BlrHyper),
    Mlr(MlrHyper),
    Mlp(MlpHyper),
    Tree(TreeHyper),
}

/// The defender's half of a campaign: the served model, the data and
/// recipe that produced it, every input it has accepted as benign, and one
/// snapshot per retrain epoch with the original model at index 0.
#[derive(Debug, Clone)]
pub struct DefenderState {
    pub model: TargetModel,
    pub train: LabeledDataset,
    pub trainer: TrainerSpec,
    pub accepted: Vec<FeatureVector>,
    pub history: Vec<TargetModel>,
}

impl DefenderState {
    pub fn new(model: TargetModel, train: LabeledDataset, trainer: TrainerSpec) -> Self {
        let history = vec![model.clone()];
        DefenderState {
            model,
            train,
            trainer,
            accepted: Vec::new(),
            history,
        }
    }
}

fn one_hot(labels: &[usize], c: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&y| {
            let mut t = vec![0.0; c];
            t[y] = 1.0;
            t
        })
        .collect()
}

/// Retrain on the original data plus `traffic`, each traffic sample
/// labeled by the currently served model and weighted by `lambda`. The new
/// model becomes the served one and is appended to the history.
///
/// With lambda = 0 the traffic is dropped before training instead of being
/// passed through at weight zero: a weightless sample cannot move a
/// gradient, but it would still widen the tree builder's split-candidate
/// set, and the contract is that a zero-weight retrain decides exactly
/// like a plain one.
pub fn defender_retrain(
    defender: &mut DefenderState,
    traffic: &[FeatureVector],
    lambda: f64,
) -> Result<TargetModel> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "self-training weight {lambda} outside [0, 1]"
        )));
    }
    let d = defender.train.d;
    let c = defender.train.c;
    let mut points = defender.train.points.clone();
    let mut labels = defender.train.labels.clone();
    let mut weights = vec![1.0; points.len()];
    if lambda > 0.0 {
        for x in traffic {
            labels.push(defender.model.predict_label(x)?);
            points.push(x.clone());
            weights.push(lambda);
        }
    }
    let model = match &defender.trainer {
        TrainerSpec::Blr(h) => {
            TargetModel::Blr(train_blr_weighted(&points, &labels, &weights, d, h)?)
        }
        TrainerSpec::Mlr(h) => TargetModel::Mlr(fit_mlr(
            &points,
            &one_hot(&labels, c),
            d,
            c,
            h,
            Some(&weights),
        )?),
        TrainerSpec::Mlp(h) => TargetModel::Mlp(fit_mlp(
            &points,
            &one_hot(&labels, c),
            d,
            c,
            h,
            Some(&weights),
        )?),
        TrainerSpec::Tree(h) => {
            TargetModel::Tree(train_tree_weighted(&points, &labels, &weights, d, c, h)?)
        }
    };
    defender.model = model.clone();
    defender.history.push(model.clone());
    Ok(model)
}

/// Fraction of `n_samples` seeded uniform points on which the two models
/// disagree about the label.
pub fn boundary_drift(
    model_t: &TargetModel,
    model_0: &TargetModel,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if model_t.dim() != model_0.dim() {
        return Err(Error::DimensionMismatch {
            expected: model_0.dim(),
            got: model_t.dim(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "drift needs at least one sample".into(),
        ));
    }
    let mut flips = 0usize;
    for x in uniform_points(seed, n_samples, model_0.dim()) {
        if model_t.predict_label(&x)? != model_0.predict_label(&x)? {
            flips += 1;
        }
    }
    Ok(flips as f64 / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_gaussian_blobs;
    use crate::models::{train_blr, BlrModel};
    use crate::rng::uniform_points;

    fn defender_of(kind: &str, seed: u64) -> DefenderState {
        let c = if kind == "mlr" { 3 } else { 2 };
        let ds = gen_gaussian_blobs(seed, 40, 3, c, 0.8).unwrap();
        let trainer = match kind {
            "blr" => TrainerSpec::Blr(BlrHyper::default()),
            "mlr" => TrainerSpec::Mlr(MlrHyper::default()),
            "mlp" => TrainerSpec::Mlp(MlpHyper {
                epochs: 200,
                ..MlpHyper::default()
            }),
            _ => TrainerSpec::Tree(TreeHyper::default()),
        };
        let mut d = DefenderState::new(
            TargetModel::Blr(BlrModel {
                w: vec![0.0; 3],
                beta: 0.0,
            }),
            ds,
            trainer,
        );
        // bootstrap: the served model is one produced by the recipe itself
        let m = defender_retrain(&mut d, &[], 0.0).unwrap();
        d.history = vec![m.clone()];
        d.model = m;
        d
    }

    fn json(m: &TargetModel) -> String {
        serde_json::to_string(m).unwrap()
    }

    #[test]
    fn zero_weight_traffic_cannot_move_any_model_family() {
        for kind in ["blr", "mlr", "mlp", "tree"] {
            let mut with_traffic = defender_of(kind, 51);
            let mut plain = defender_of(kind, 51);
            let traffic = uniform_points(9, 25, 3);
            let a = defender_retrain(&mut with_traffic, &traffic, 0.0).unwrap();
            let b = defender_retrain(&mut plain, &[], 0.5).unwrap();
            assert_eq!(json(&a), json(&b), "family {kind}");
        }
    }

    #[test]
    fn empty_traffic_reproduces_the_public_trainer_bit_for_bit() {
        use crate::models::{train_mlp, train_mlr, train_tree};
        let mut blr = defender_of("blr", 52);
        let expect = TargetModel::Blr(train_blr(&blr.train, &BlrHyper::default()).unwrap());
        assert_eq!(
            json(&defender_retrain(&mut blr, &[], 0.8).unwrap()),
            json(&expect)
        );

        let mut mlr = defender_of("mlr", 52);
        let expect = TargetModel::Mlr(train_mlr(&mlr.train, &MlrHyper::default()).unwrap());
        assert_eq!(
            json(&defender_retrain(&mut mlr, &[], 0.8).unwrap()),
            json(&expect)
        );

        let mut mlp = defender_of("mlp", 52);
        let hyper = MlpHyper {
            epochs: 200,
            ..MlpHyper::default()
        };
        let expect = TargetModel::Mlp(train_mlp(&mlp.train, &hyper).unwrap());
        assert_eq!(
            json(&defender_retrain(&mut mlp, &[], 0.8).unwrap()),
            json(&expect)
        );

        let mut tree = defender_of("tree", 52);
        let expect = TargetModel::Tree(train_tree(&tree.train, &TreeHyper::default()).unwrap());
        assert_eq!(
            json(&defender_retrain(&mut tree, &[], 0.8).unwrap()),
            json(&expect)
        );
    }

    #[test]
    fn heavy_near_boundary_traffic_drags_the_boundary() {
        let mut defender = defender_of("blr", 53);
        let before = defender.model.clone();
        // gather uniform points the current model is unsure about; feeding
        // them back self-labeled pushes the boundary past them
        let traffic: Vec<FeatureVector> = uniform_points(77, 4000, 3)
            .into_iter()
            .filter(|x| {
                let p = defender.model.predict_proba(x).unwrap()[1];
                (0.35..0.5).contains(&p)
            })
            .take(60)
            .collect();
        assert!(traffic.len() >= 30, "blob geometry starves the test");
        defender_retrain(&mut defender, &traffic, 1.0).unwrap();
        let drift = boundary_drift(&defender.model, &before, 4000, 5).unwrap();
        assert!(drift > 0.0, "drift = {drift}");
    }

    #[test]
    fn each_retrain_appends_one_snapshot() {
        let mut defender = defender_of("blr", 54);
        let original = json(&defender.history[0]);
        for _ in 0..3 {
            defender_retrain(&mut defender, &[], 0.5).unwrap();
        }
        assert_eq!(defender.history.len(), 4);
        assert_eq!(json(&defender.history[0]), original);
        assert_eq!(json(defender.history.last().unwrap()), json(&defender.model));
    }

    #[test]
    fn a_model_never_drifts_from_itself() {
        let defender = defender_of("tree", 55);
        let drift = boundary_drift(&defender.model, &defender.model, 600, 11).unwrap();
        assert_eq!(drift, 0.0);
    }

    #[test]
    fn a_complement_model_drifts_everywhere() {
        let m = TargetModel::Blr(BlrModel {
            w: vec![1.0, -2.0],
            beta: 0.3,
        });
        let flipped = TargetModel::Blr(BlrModel {
            w: vec![-1.0, 2.0],
            beta: -0.3,
        });
        assert_eq!(boundary_drift(&flipped, &m, 500, 12).unwrap(), 1.0);
    }

    #[test]
    fn drift_is_always_a_fraction() {
        let a = defender_of("blr", 56).model;
        let b = defender_of("blr", 57).model;
        let drift = boundary_drift(&a, &b, 300, 13).unwrap();
        assert!((0.0..=1.0).contains(&drift));
    }

    #[test]
    fn degenerate_drift_inputs_are_rejected() {
        let m2 = TargetModel::Blr(BlrModel {
            w: vec![1.0, 1.0],
            beta: 0.0,
        });
        let m3 = TargetModel::Blr(BlrModel {
            w: vec![1.0, 1.0, 1.0],
            beta: 0.0,
        });
        assert!(matches!(
            boundary_drift(&m2, &m3, 100, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            boundary_drift(&m2, &m2, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn out_of_range_weights_are_rejected() {
        let mut defender = defender_of("blr", 58);
        for bad in [-0.1, 1.5, f64::NAN] {
            assert!(matches!(
                defender_retrain(&mut defender, &[], bad),
                Err(Error::InvalidArgument(_))
            ));
        }
    }
}
