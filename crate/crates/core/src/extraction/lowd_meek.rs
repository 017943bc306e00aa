//! Label-only hyperplane recovery for linear targets.
//!
//! With two witnesses on opposite sides of the boundary, bisecting the
//! segment between them pins a boundary point. From an anchor stepped
//! slightly back onto the negative side, the signed distance to cross the
//! boundary along each axis is inversely proportional to that weight
//! component, so axis-wise bisections recover the weight direction. Only
//! labels are consumed: the attack never sees a confidence value, and any
//! positive rescaling of the target's parameters yields the same
//! transcript and the same estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{score, ExtractionResult, FidelityEval, ProbeRecord};
use crate::feature::{dot, PartialFeatureVector};
use crate::models::{BlrModel, TargetModel};
use crate::oracle::QueryOracle;

/// Recovered decision boundary, scaled to a unit-norm weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneEstimate {
    pub w_hat: Vec<f64>,
    pub beta_hat: f64,
    /// Bisection width every crossing distance was resolved to.
    pub precision: f64,
}

impl HyperplaneEstimate {
    /// The estimate as a logistic model. Labels match the recovered
    /// halfspaces; confidences are meaningless for a labels-only attack.
    pub fn to_model(&self) -> TargetModel {
        TargetModel::Blr(BlrModel {
            w: self.w_hat.clone(),
            beta: self.beta_hat,
        })
    }
}

/// Relative back-step from the boundary onto the negative side; the
/// anchor's margin is what every axis crossing is measured against.
const ANCHOR_STEP: f64 = 0.05;
/// Axis search never looks further than this from the anchor; components
/// whose crossings lie beyond are taken as zero.
const MAX_REACH: f64 = 64.0;

struct Labeler<'a, O: QueryOracle> {
    oracle: &'a mut O,
    positive_label: usize,
    transcript: Vec<ProbeRecord>,
}

impl<'a, O: QueryOracle> Labeler<'a, O> {
    fn label(&mut self, x: &[f64]) -> Result<usize> {
        let response = self.oracle.query(x, "lowd-meek")?;
        let label = response.label().ok_or(Error::WrongMode)?;
        self.transcript.push(ProbeRecord {
            input: PartialFeatureVector::complete(x),
            response,
        });
        Ok(label)
    }

    fn positive(&mut self, x: &[f64]) -> Result<bool> {
        Ok(self.label(x)? == self.positive_label)
    }
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect()
}

fn offset(x: &[f64], i: usize, c: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    out[i] += c;
    out
}

/// Recover the target's decision boundary from two differently labeled
/// witnesses, to crossing precision `eps`.
pub fn lowd_meek<O: QueryOracle>(
    oracle: &mut O,
    x_pos: &[f64],
    x_neg: &[f64],
    eps: f64,
    eval: &FidelityEval,
) -> Result<(HyperplaneEstimate, ExtractionResult)> {
    let d = x_pos.len();
    if d == 0 || x_neg.len() != d {
        return Err(Error::InvalidArgument(
            "witnesses must share a nonzero dimension".into(),
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be in (0,1), got {eps}"
        )));
    }
    let before = oracle.accepted();
    let mut lab = Labeler {
        oracle,
        positive_label: 0,
        transcript: Vec::new(),
    };
    lab.positive_label = lab.label(x_pos)?;
    if lab.label(x_neg)? == lab.positive_label {
        return Err(Error::SameLabelWitnesses);
    }

    // bisect the segment until the boundary is bracketed within eps
    let seg_len = crate::feature::sq_dist(x_pos, x_neg).sqrt();
    let mut s_lo = 0.0; // negative side
    let mut s_hi = 1.0; // positive side
    while (s_hi - s_lo) * seg_len > eps {
        let mid = 0.5 * (s_lo + s_hi);
        if lab.positive(&lerp(x_neg, x_pos, mid))? {
            s_hi = mid;
        } else {
            s_lo = mid;
        }
    }
    let x_b = lerp(x_neg, x_pos, 0.5 * (s_lo + s_hi));

    // anchor on the negative side with a definite margin
    let anchor = lerp(x_neg, x_pos, s_lo - ANCHOR_STEP);
    if lab.positive(&anchor)? {
        return Err(Error::InvalidArgument(
            "anchor behind the boundary is positive; target is not a halfspace".into(),
        ));
    }

    // signed distance to cross the boundary along each axis
    let mut crossings: Vec<Option<f64>> = vec![None; d];
    for i in 0..d {
        'directions: for dir in [1.0, -1.0] {
            let mut reach = 0.25;
            let mut prev = 0.0;
            while reach <= MAX_REACH {
                if lab.positive(&offset(&anchor, i, dir * reach))? {
                    let (mut lo, mut hi) = (prev, reach);
                    while hi - lo > eps {
                        let mid = 0.5 * (lo + hi);
                        if lab.positive(&offset(&anchor, i, dir * mid))? {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    crossings[i] = Some(dir * 0.5 * (lo + hi));
                    break 'directions;
                }
                prev = reach;
                reach *= 2.0;
            }
        }
    }

    // the best-resolved coordinate (smallest crossing) is the reference
    let i_ref = crossings
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|v| (i, v.abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or(Error::SingularSystem)?;
    let s_ref = crossings[i_ref].expect("reference crossing exists");
    let mut w_hat: Vec<f64> = crossings
        .iter()
        .map(|c| c.map_or(0.0, |s| s_ref / s))
        .collect();
    let norm = dot(&w_hat, &w_hat).sqrt();
    for w in &mut w_hat {
        *w /= norm;
    }
    let mut beta_hat = -dot(&w_hat, &x_b);
    if dot(&w_hat, x_pos) + beta_hat < 0.0 {
        for w in &mut w_hat {
            *w = -*w;
        }
        beta_hat = -beta_hat;
    }

    let estimate = HyperplaneEstimate {
        w_hat,
        beta_hat,
        precision: eps,
    };
    let clone = estimate.to_model();
    let mut notes = vec![
        "labels-only attack: clone confidences are uncalibrated".into(),
        format!("reference coordinate {i_ref}"),
    ];
    let transcript = lab.transcript;
    let (r_test, r_unif) = score(&clone, oracle, eval, &mut notes)?;
    let result = ExtractionResult {
        clone,
        queries_used: oracle.accepted() - before,
        r_test,
        r_unif,
        transcript,
        notes,
    };
    Ok((estimate, result))
}
