//! Equation-solving extraction. Confidence outputs are equations in the
//! target's parameters: invert the sigmoid and solve linearly for BLR, or
//! fit a same-shaped model to observed confidence vectors for MLR/MLP.

use crate::error::{Error, Result};
use crate::extraction::linalg::least_squares;
use crate::extraction::{score, ExtractionResult, FidelityEval, ProbeRecord};
use crate::feature::{FeatureVector, PartialFeatureVector};
use crate::models::{BlrModel, MlpHyper, MlrHyper, TargetModel};
use crate::models::{fit_mlp, fit_mlr};
use crate::oracle::{OracleResponse, QueryOracle};
use crate::rng::{sub_seed, uniform_points};

/// Inverse sigmoid with clamping: y is pulled into [eps, 1-eps] first so
/// rounded confidences of 0 or 1 cannot produce infinities.
pub fn invert_sigmoid(y: f64, eps: f64) -> f64 {
    debug_assert!(eps > 0.0 && eps < 0.5);
    let eps = eps.max(f64::MIN_POSITIVE);
    let y = y.clamp(eps, 1.0 - eps);
    (y / (1.0 - y)).ln()
}

const SIGMOID_CLAMP: f64 = 1e-9;
/// How far along each basis direction the designed probes sit.
const BASIS_SCALE: f64 = 0.75;

fn confidence_vector(response: &OracleResponse, c: usize) -> Result<Vec<f64>> {
    let conf = response
        .confidences()
        .ok_or(Error::WrongMode)?;
    if conf.len() != c {
        return Err(Error::WrongClassCount(format!(
            "oracle reports {} classes, expected {c}",
            conf.len()
        )));
    }
    Ok(conf.to_vec())
}

/// Recover a binary logistic target by probing and solving the linear
/// system w.x + beta = invert_sigmoid(confidence).
///
/// The first d+1 probes are the origin plus scaled basis points, which are
/// affinely independent by construction; remaining probes (and any retry
/// after a singular fit) are seeded uniform points.
pub fn extract_blr<O: QueryOracle>(
    oracle: &mut O,
    d: usize,
    n_queries: usize,
    seed: u64,
    eval: &FidelityEval,
) -> Result<ExtractionResult> {
    if d == 0 || n_queries < d + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least d+1 = {} queries, got {n_queries}",
            d + 1
        )));
    }
    let before = oracle.accepted();
    let mut transcript = Vec::new();
    let mut notes = Vec::new();
    let mut params = None;
    for attempt in 0..3 {
        let probes: Vec<FeatureVector> = if attempt == 0 {
            let mut p = vec![vec![0.0; d]];
            for i in 0..d {
                let mut x = vec![0.0; d];
                x[i] = BASIS_SCALE;
                p.push(x);
            }
            p.extend(uniform_points(sub_seed(seed, 0), n_queries - (d + 1), d));
            p
        } else {
            notes.push(format!("retry {attempt}: re-seeded random probes"));
            uniform_points(sub_seed(seed, attempt as u64), n_queries, d)
        };
        let mut rows = Vec::with_capacity(probes.len());
        let mut rhs = Vec::with_capacity(probes.len());
        for x in probes {
            let response = oracle.query(&x, "extract-blr")?;
            let conf = confidence_vector(&response, 2)?;
            transcript.push(ProbeRecord {
                input: PartialFeatureVector::complete(&x),
                response,
            });
            rhs.push(invert_sigmoid(conf[1], SIGMOID_CLAMP));
            let mut row = x;
            row.push(1.0);
            rows.push(row);
        }
        match least_squares(&rows, &rhs) {
            Ok(p) => {
                params = Some(p);
                break;
            }
            Err(Error::SingularSystem) => continue,
            Err(e) => return Err(e),
        }
    }
    let mut params = params.ok_or(Error::SingularSystem)?;
    let beta = params.pop().expect("d+1 parameters");
    let clone = TargetModel::Blr(BlrModel { w: params, beta });
    let (r_test, r_unif) = score(&clone, oracle, eval, &mut notes)?;
    Ok(ExtractionResult {
        clone,
        queries_used: oracle.accepted() - before,
        r_test,
        r_unif,
        transcript,
        notes,
    })
}

fn probe_confidences<O: QueryOracle>(
    oracle: &mut O,
    probes: &[FeatureVector],
    c: usize,
    source: &str,
    transcript: &mut Vec<ProbeRecord>,
) -> Result<Vec<Vec<f64>>> {
    let mut targets = Vec::with_capacity(probes.len());
    for x in probes {
        let response = oracle.query(x, source)?;
        targets.push(confidence_vector(&response, c)?);
        transcript.push(ProbeRecord {
            input: PartialFeatureVector::complete(x),
            response,
        });
    }
    Ok(targets)
}

/// Mean cross-entropy of the clone's predictions against observed soft
/// targets, and the targets' own mean entropy (the attainable floor).
fn ce_and_floor(clone: &TargetModel, points: &[FeatureVector], targets: &[Vec<f64>]) -> (f64, f64) {
    let mut ce = 0.0;
    let mut floor = 0.0;
    for (x, t) in points.iter().zip(targets) {
        let p = clone.predict_proba(x).expect("dimensions match");
        for (tk, pk) in t.iter().zip(&p) {
            ce -= tk * pk.max(1e-12).ln();
            if *tk > 0.0 {
                floor -= tk * tk.ln();
            }
        }
    }
    let n = points.len().max(1) as f64;
    (ce / n, floor / n)
}

const PLATEAU_KL: f64 = 0.05;

/// Clone a softmax regression target by querying seeded uniform points and
/// fitting the same model family to the observed confidence vectors.
pub fn extract_mlr<O: QueryOracle>(
    oracle: &mut O,
    d: usize,
    c: usize,
    budget: usize,
    hyper: &MlrHyper,
    eval: &FidelityEval,
) -> Result<ExtractionResult> {
    if c <= 2 {
        return Err(Error::WrongClassCount(format!(
            "softmax extraction needs c > 2, got {c}"
        )));
    }
    if d == 0 || budget == 0 {
        return Err(Error::InvalidArgument("need d >= 1 and budget >= 1".into()));
    }
    let before = oracle.accepted();
    let mut transcript = Vec::new();
    let mut notes = Vec::new();
    let probes = uniform_points(sub_seed(hyper.seed, 1), budget, d);
    let targets = probe_confidences(oracle, &probes, c, "extract-mlr", &mut transcript)?;
    let model = fit_mlr(&probes, &targets, d, c, hyper, None)?;
    let clone = TargetModel::Mlr(model);
    let (ce, floor) = ce_and_floor(&clone, &probes, &targets);
    if ce - floor > PLATEAU_KL {
        notes.push(format!(
            "fit plateaued: mean KL to observed confidences {:.4}",
            ce - floor
        ));
    }
    let (r_test, r_unif) = score(&clone, oracle, eval, &mut notes)?;
    Ok(ExtractionResult {
        clone,
        queries_used: oracle.accepted() - before,
        r_test,
        r_unif,
        transcript,
        notes,
    })
}

const MLP_RESTARTS: u64 = 3;

/// Clone an MLP target with a guessed hidden width: query seeded uniform
/// points, fit from several seeded initializations, keep the restart with
/// the best held-out cross-entropy.
pub fn extract_mlp<O: QueryOracle>(
    oracle: &mut O,
    d: usize,
    c: usize,
    h_guess: usize,
    budget: usize,
    hyper: &MlpHyper,
    eval: &FidelityEval,
) -> Result<ExtractionResult> {
    if h_guess == 0 {
        return Err(Error::InvalidHyper("h_guess must be >= 1".into()));
    }
    if c < 2 {
        return Err(Error::WrongClassCount(format!("need c >= 2, got {c}")));
    }
    if d == 0 || budget < 2 {
        return Err(Error::InvalidArgument("need d >= 1 and budget >= 2".into()));
    }
    let before = oracle.accepted();
    let mut transcript = Vec::new();
    let mut notes = Vec::new();
    let probes = uniform_points(sub_seed(hyper.seed, 1), budget, d);
    let targets = probe_confidences(oracle, &probes, c, "extract-mlp", &mut transcript)?;
    // hold out a fifth of the probes to pick between restarts
    let n_fit = budget - (budget / 5).max(1);
    let (fit_x, held_x) = probes.split_at(n_fit);
    let (fit_t, held_t) = targets.split_at(n_fit);
    let mut best: Option<(TargetModel, f64, u64)> = None;
    for restart in 0..MLP_RESTARTS {
        let h = MlpHyper {
            hidden: h_guess,
            seed: sub_seed(hyper.seed, 100 + restart),
            ..*hyper
        };
        let model = TargetModel::Mlp(fit_mlp(fit_x, fit_t, d, c, &h, None)?);
        let (held_ce, _) = ce_and_floor(&model, held_x, held_t);
        if best.as_ref().map_or(true, |(_, b, _)| held_ce < *b) {
            best = Some((model, held_ce, restart));
        }
    }
    let (clone, held_ce, restart) = best.expect("at least one restart");
    notes.push(format!(
        "kept restart {restart} of {MLP_RESTARTS}, held-out cross-entropy {held_ce:.4}"
    ));
    let (r_test, r_unif) = score(&clone, oracle, eval, &mut notes)?;
    Ok(ExtractionResult {
        clone,
        queries_used: oracle.accepted() - before,
        r_test,
        r_unif,
        transcript,
        notes,
    })
}
