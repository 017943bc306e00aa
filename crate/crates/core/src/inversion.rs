//! Model inversion by coordinate-wise confidence maximization. Starting
//! from the domain center, each coordinate in turn is set to the grid value
//! that maximizes the clone's (or oracle's) confidence for one class, until
//! a full pass changes nothing. The search never leaves the grid, so at
//! desk scale it can be certified against an exhaustive grid sweep.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::feature::{sq_dist, FeatureVector};
use crate::models::TargetModel;
use crate::oracle::QueryOracle;
use crate::rng::rng;
use rand::seq::SliceRandom;

/// Outcome of one coordinate-ascent run.
///
/// `trace` holds the objective after the initial evaluation and after every
/// accepted update; it is non-decreasing by construction. `nearest_exemplar`
/// stays `None` unless the caller has training data to evaluate against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionResult {
    pub x_opt: FeatureVector,
    pub achieved_confidence: f64,
    pub passes: usize,
    pub queries_used: u64,
    pub trace: Vec<f64>,
    pub nearest_exemplar: Option<f64>,
}

/// Maximize one class's confidence against a live confidence-mode oracle.
///
/// Every distinct probe is metered; repeats are served from a memo. Errors
/// from the oracle (budget, mode) surface mid-run.
pub fn invert_class<O: QueryOracle>(
    oracle: &mut O,
    d: usize,
    class_index: usize,
    grid_points_per_axis: usize,
    max_passes: usize,
    seed: u64,
) -> Result<InversionResult> {
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    let before = oracle.accepted();
    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut eval = |x: &[f64]| -> Result<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let response = oracle.query(x, "invert")?;
        let conf = response.confidences().ok_or(Error::WrongMode)?;
        let v = *conf.get(class_index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "class {class_index} out of range for {} classes",
                conf.len()
            ))
        })?;
        memo.insert(key, v);
        Ok(v)
    };
    let (x_opt, achieved, passes, trace) =
        ascend(&mut eval, d, grid_points_per_axis, max_passes, seed)?;
    Ok(InversionResult {
        x_opt,
        achieved_confidence: achieved,
        passes,
        queries_used: oracle.accepted() - before,
        trace,
        nearest_exemplar: None,
    })
}

/// Same search against a local clone: zero oracle traffic, and with an
/// identical seed the iterates match `invert_class` on the cloned target
/// exactly.
pub fn inversion_against_clone(
    clone: &TargetModel,
    class_index: usize,
    grid_points_per_axis: usize,
    max_passes: usize,
    seed: u64,
) -> Result<InversionResult> {
    if class_index >= clone.class_count() {
        return Err(Error::InvalidArgument(format!(
            "class {class_index} out of range for {} classes",
            clone.class_count()
        )));
    }
    let mut eval = |x: &[f64]| Ok(clone.predict_proba(x)?[class_index]);
    let (x_opt, achieved, passes, trace) = ascend(
        &mut eval,
        clone.dim(),
        grid_points_per_axis,
        max_passes,
        seed,
    )?;
    Ok(InversionResult {
        x_opt,
        achieved_confidence: achieved,
        passes,
        queries_used: 0,
        trace,
        nearest_exemplar: None,
    })
}

/// Euclidean distance from `x` to the closest dataset point, for judging
/// how near an inverted input lands to real training exemplars.
pub fn nearest_exemplar_distance(ds: &LabeledDataset, x: &[f64]) -> Result<f64> {
    if ds.points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(ds
        .points
        .iter()
        .map(|p| sq_dist(p, x))
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

/// Coordinate ascent over the uniform grid {0, 1/(n-1), ..., 1} per axis.
///
/// A coordinate moves only on strict improvement, to the smallest grid
/// value attaining the maximum; a flat objective therefore stays put and
/// stops after one pass. Passes visit coordinates in a seeded random order,
/// reshuffled each pass.
fn ascend<F: FnMut(&[f64]) -> Result<f64>>(
    eval: &mut F,
    d: usize,
    grid_points_per_axis: usize,
    max_passes: usize,
    seed: u64,
) -> Result<(FeatureVector, f64, usize, Vec<f64>)> {
    if grid_points_per_axis < 2 {
        return Err(Error::InvalidArgument(
            "need at least two grid points per axis".into(),
        ));
    }
    let grid: Vec<f64> = (0..grid_points_per_axis)
        .map(|j| j as f64 / (grid_points_per_axis - 1) as f64)
        .collect();
    // index arithmetic, so the tie between the two middle points of an
    // even grid lands on the smaller one instead of on float rounding
    let center = (grid_points_per_axis - 1) / 2;

    let mut at = vec![center; d];
    let mut x: FeatureVector = at.iter().map(|&j| grid[j]).collect();
    let mut current = eval(&x)?;
    let mut trace = vec![current];
    let mut order: Vec<usize> = (0..d).collect();
    let mut r = rng(seed);

    let mut passes = 0;
    while passes < max_passes {
        passes += 1;
        order.shuffle(&mut r);
        let mut changed = false;
        for &i in &order {
            let mut best = current;
            let mut best_j = at[i];
            for (j, &v) in grid.iter().enumerate() {
                if j == at[i] {
                    continue;
                }
                x[i] = v;
                let score = eval(&x)?;
                // strict > keeps the incumbent on ties and, among equally
                // good challengers, the smallest grid value scanned first
                if score > best {
                    best = score;
                    best_j = j;
                }
            }
            x[i] = grid[best_j];
            if best_j != at[i] {
                at[i] = best_j;
                current = best;
                trace.push(current);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok((x, current, passes, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_gaussian_blobs;
    use crate::extraction::{extract_mlr, FidelityEval};
    use crate::models::{train_mlp, BlrModel, MlpHyper, MlrHyper};
    use crate::oracle::{make_oracle, Oracle, OracleConfig, OracleMode};

    fn exact_oracle(model: TargetModel) -> Oracle {
        make_oracle(model, OracleConfig::default()).unwrap()
    }

    fn assert_monotone(trace: &[f64]) {
        for w in trace.windows(2) {
            assert!(w[1] >= w[0], "trace dipped: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn monotone_positive_weights_drive_x_to_the_box_corner() {
        let target = TargetModel::Blr(BlrModel {
            w: vec![1.0; 3],
            beta: -1.5,
        });
        let mut o = exact_oracle(target);
        let r = invert_class(&mut o, 3, 1, 5, 10, 7).unwrap();
        assert_eq!(r.x_opt, vec![1.0; 3]);
        assert!((r.achieved_confidence - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-12);
        assert_monotone(&r.trace);
        assert!(r.x_opt.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn flat_objective_stays_at_the_center_and_stops_after_one_pass() {
        let target = TargetModel::Blr(BlrModel {
            w: vec![0.0; 2],
            beta: 0.0,
        });
        let mut o = exact_oracle(target);
        let r = invert_class(&mut o, 2, 1, 5, 10, 7).unwrap();
        assert_eq!(r.x_opt, vec![0.5, 0.5]);
        assert_eq!(r.achieved_confidence, 0.5);
        assert_eq!(r.passes, 1);
        assert_eq!(r.trace, vec![0.5]);
        // center + (grid-1) fresh probes per coordinate, nothing revisited
        assert_eq!(r.queries_used, 1 + 2 * 4);
    }

    #[test]
    fn even_grid_snaps_the_center_toward_the_smaller_value() {
        let target = TargetModel::Blr(BlrModel {
            w: vec![0.0; 2],
            beta: 0.0,
        });
        let mut o = exact_oracle(target);
        // grid {0, 1/3, 2/3, 1}: 1/3 and 2/3 tie in distance to 0.5
        let r = invert_class(&mut o, 2, 1, 4, 10, 7).unwrap();
        assert_eq!(r.x_opt, vec![1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn reaches_the_exhaustive_grid_maximum_on_a_trained_mlp() {
        let ds = gen_gaussian_blobs(21, 120, 2, 2, 0.9).unwrap();
        let target = TargetModel::Mlp(
            train_mlp(
                &ds,
                &MlpHyper {
                    hidden: 8,
                    seed: 21,
                    ..MlpHyper::default()
                },
            )
            .unwrap(),
        );
        for class in 0..2 {
            let mut exhaustive: f64 = 0.0;
            for a in 0..33 {
                for b in 0..33 {
                    let x = [a as f64 / 32.0, b as f64 / 32.0];
                    exhaustive = exhaustive.max(target.predict_proba(&x).unwrap()[class]);
                }
            }
            let mut o = exact_oracle(target.clone());
            let r = invert_class(&mut o, 2, class, 33, 10, 17).unwrap();
            assert!(
                r.achieved_confidence >= exhaustive - 0.01,
                "class {class}: reached {} vs grid max {exhaustive}",
                r.achieved_confidence
            );
            assert_monotone(&r.trace);

            // the inverted point should look at least as confident as the
            // most confident real training exemplar of that class
            let best_train = ds
                .points
                .iter()
                .map(|p| target.predict_proba(p).unwrap()[class])
                .fold(0.0, f64::max);
            assert!(r.achieved_confidence >= best_train - 0.05);

            let near = nearest_exemplar_distance(&ds, &r.x_opt).unwrap();
            assert!(near.is_finite() && near >= 0.0);
        }
    }

    #[test]
    fn clone_inversion_is_free_and_matches_the_oracle_run() {
        let ds = gen_gaussian_blobs(22, 100, 3, 3, 0.8).unwrap();
        let target = TargetModel::Mlr(
            crate::models::train_mlr(&ds, &MlrHyper::default()).unwrap(),
        );
        let mut o = exact_oracle(target.clone());
        let live = invert_class(&mut o, 3, 2, 9, 10, 5).unwrap();
        let local = inversion_against_clone(&target, 2, 9, 10, 5).unwrap();
        assert_eq!(local.queries_used, 0);
        assert!(live.queries_used > 0);
        assert_eq!(local.x_opt, live.x_opt);
        assert_eq!(local.trace, live.trace);
        assert_eq!(local.passes, live.passes);
    }

    #[test]
    fn inverting_an_imperfect_clone_still_scores_close_on_the_target() {
        let ds = gen_gaussian_blobs(23, 80, 4, 3, 0.9).unwrap();
        let target = TargetModel::Mlr(
            crate::models::train_mlr(&ds, &MlrHyper::default()).unwrap(),
        );
        let mut o = exact_oracle(target.clone());
        let ex = extract_mlr(&mut o, 4, 3, 1500, &MlrHyper::default(), &FidelityEval::skip())
            .unwrap();
        let r = inversion_against_clone(&ex.clone, 1, 17, 10, 9).unwrap();
        let on_target = target.predict_proba(&r.x_opt).unwrap()[1];
        assert!(
            (on_target - r.achieved_confidence).abs() < 0.1,
            "clone said {}, target says {on_target}",
            r.achieved_confidence
        );
    }

    #[test]
    fn class_out_of_range_is_rejected() {
        let target = TargetModel::Blr(BlrModel {
            w: vec![1.0; 2],
            beta: 0.0,
        });
        assert!(matches!(
            inversion_against_clone(&target, 5, 9, 3, 1),
            Err(Error::InvalidArgument(_))
        ));
        let mut o = exact_oracle(target);
        assert!(matches!(
            invert_class(&mut o, 2, 5, 9, 3, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn oracle_budget_exhaustion_surfaces_mid_run() {
        let target = TargetModel::Blr(BlrModel {
            w: vec![1.0, -2.0],
            beta: 0.2,
        });
        let mut o = make_oracle(
            target,
            OracleConfig {
                budget: 5,
                ..OracleConfig::default()
            },
        )
        .unwrap();
        assert!(matches!(
            invert_class(&mut o, 2, 1, 33, 10, 3),
            Err(Error::BudgetExhausted)
        ));
    }

    #[test]
    fn label_only_oracle_is_rejected() {
        let target = TargetModel::Blr(BlrModel {
            w: vec![1.0, 1.0],
            beta: 0.0,
        });
        let mut o = make_oracle(
            target,
            OracleConfig {
                mode: OracleMode::LabelOnly,
                ..OracleConfig::default()
            },
        )
        .unwrap();
        assert!(matches!(
            invert_class(&mut o, 2, 1, 9, 5, 3),
            Err(Error::WrongMode)
        ));
    }

    #[test]
    fn evaluation_count_respects_the_termination_bound() {
        let ds = gen_gaussian_blobs(24, 60, 3, 2, 0.7).unwrap();
        let target = TargetModel::Mlp(train_mlp(&ds, &MlpHyper::default()).unwrap());
        let mut o = exact_oracle(target);
        let r = invert_class(&mut o, 3, 0, 7, 4, 11).unwrap();
        assert!(r.passes <= 4);
        assert!(r.queries_used <= 1 + 4 * 3 * 7);
        assert!(r.x_opt.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
