//! Path-finding extraction against the tree-id oracle.
//!
//! A partial query stops at the first node whose test feature is left
//! unspecified, and the oracle reveals that node's id. Pinning a feature
//! routes traversal past such a node, so the attacker can discover the
//! split structure one node at a time:
//!
//!   * traversal stops at node n iff n tests an unspecified feature, so
//!     pinning feature f changes the reported id iff n tests f — split
//!     detection costs one probe per unpinned feature, with no tolerance;
//!   * for a fixed set of pins, the stop id as a function of one pinned
//!     value is piecewise constant and every id occupies exactly one
//!     interval (a node's reachable set along one feature is an interval),
//!     so comparing interval endpoints is a sound "any boundary inside?"
//!     test and recursive bisection finds every boundary on a dyadic grid.
//!
//! Thresholds are reported as bracket midpoints, so each is within half a
//! grid step of the true value. Re-splits of an already pinned feature
//! deeper in the tree are caught by re-scanning every pinned feature's
//! feasible interval before trusting a context.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{score, ExtractionResult, FidelityEval, ProbeRecord};
use crate::feature::PartialFeatureVector;
use crate::models::{DecisionTree, NodeKind, SplitTest, TargetModel, TreeNode};
use crate::oracle::QueryOracle;

/// What values a feature can take, from the attacker's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureDomain {
    /// Anything in [0,1]; thresholds are localized by bisection.
    Continuous,
    /// A finite value set; every value is probed and grouped by response.
    Categorical(Vec<f64>),
}

/// Number of transcript entries re-queried after the attack to confirm the
/// oracle answered consistently.
const SENTINELS: usize = 8;

/// Feasible values of a pinned feature within one context.
#[derive(Debug, Clone)]
enum Feasible {
    /// Inclusive dyadic grid-index range.
    Range(u32, u32),
    Values(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Context {
    px: PartialFeatureVector,
    feasible: Vec<Option<Feasible>>,
}

struct TreeFinder<'a, O: QueryOracle> {
    oracle: &'a mut O,
    domains: &'a [FeatureDomain],
    /// Grid resolution exponent: probe values are u / 2^k.
    k: u32,
    memo: HashMap<Vec<Option<u64>>, u64>,
    transcript: Vec<ProbeRecord>,
    nodes: Vec<TreeNode>,
    /// Ids for interior nodes the oracle can never report; counts down
    /// from u64::MAX so they cannot collide with observed ids.
    next_synthetic: u64,
}

impl<'a, O: QueryOracle> TreeFinder<'a, O> {
    fn d(&self) -> usize {
        self.domains.len()
    }

    fn grid_max(&self) -> u32 {
        1u32 << self.k
    }

    fn grid_value(&self, u: u32) -> f64 {
        u as f64 / self.grid_max() as f64
    }

    fn synthetic_id(&mut self) -> u64 {
        let id = self.next_synthetic;
        self.next_synthetic -= 1;
        id
    }

    fn push(&mut self, node: TreeNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Memoized stop-id probe. Only unseen inputs reach the oracle.
    fn probe(&mut self, px: &PartialFeatureVector) -> Result<u64> {
        let key: Vec<Option<u64>> = px.0.iter().map(|c| c.map(f64::to_bits)).collect();
        if let Some(&id) = self.memo.get(&key) {
            return Ok(id);
        }
        let response = self.oracle.query_partial(px, "extract-tree")?;
        let id = response.node_id().ok_or(Error::WrongMode)?;
        self.transcript.push(ProbeRecord {
            input: px.clone(),
            response,
        });
        self.memo.insert(key, id);
        Ok(id)
    }

    /// All boundary positions along pinned feature `f` within grid range
    /// [lo, hi]: a pushed index u means the stop id differs between grid
    /// points u and u+1.
    fn boundaries(
        &mut self,
        px: &PartialFeatureVector,
        f: usize,
        lo: u32,
        hi: u32,
        out: &mut Vec<u32>,
    ) -> Result<()> {
        let a = self.probe(&px.with(f, self.grid_value(lo)))?;
        let b = self.probe(&px.with(f, self.grid_value(hi)))?;
        if a == b {
            return Ok(());
        }
        if hi - lo == 1 {
            out.push(lo);
            return Ok(());
        }
        let mid = lo + (hi - lo) / 2;
        self.boundaries(px, f, lo, mid, out)?;
        self.boundaries(px, f, mid, hi, out)?;
        Ok(())
    }

    /// Maximal constant-id grid ranges along `f`.
    fn scan_range(
        &mut self,
        px: &PartialFeatureVector,
        f: usize,
        lo: u32,
        hi: u32,
    ) -> Result<Vec<(u32, u32)>> {
        let mut cuts = Vec::new();
        self.boundaries(px, f, lo, hi, &mut cuts)?;
        let mut pieces = Vec::with_capacity(cuts.len() + 1);
        let mut start = lo;
        for cut in cuts {
            pieces.push((start, cut));
            start = cut + 1;
        }
        pieces.push((start, hi));
        Ok(pieces)
    }

    /// Groups `vals` by stop id, in first-seen order.
    fn scan_values(
        &mut self,
        px: &PartialFeatureVector,
        f: usize,
        vals: &[f64],
    ) -> Result<Vec<(u64, Vec<f64>)>> {
        let mut groups: Vec<(u64, Vec<f64>)> = Vec::new();
        for &v in vals {
            let id = self.probe(&px.with(f, v))?;
            match groups.iter_mut().find(|(g, _)| *g == id) {
                Some((_, members)) => members.push(v),
                None => groups.push((id, vec![v])),
            }
        }
        Ok(groups)
    }

    /// Identify the node the context stops at and build its clone subtree.
    fn expand(&mut self, ctx: &Context) -> Result<usize> {
        let id_cur = self.probe(&ctx.px)?;

        // a pinned feature may be split again deeper in the tree; if the
        // stop id varies across its feasible values the region is not yet
        // uniform and must be subdivided first
        for f in 0..self.d() {
            match &ctx.feasible[f] {
                Some(Feasible::Range(lo, hi)) if lo < hi => {
                    let pieces = self.scan_range(&ctx.px, f, *lo, *hi)?;
                    if pieces.len() > 1 {
                        return self.build_chain(ctx, f, &pieces, None);
                    }
                }
                Some(Feasible::Values(vals)) if vals.len() > 1 => {
                    let groups = self.scan_values(&ctx.px, f, vals)?;
                    if groups.len() > 1 {
                        return self.build_values(ctx, f, &groups, None);
                    }
                }
                _ => {}
            }
        }

        // the stop node tests exactly the unpinned feature whose pinning
        // changes the reported id; if none does, it is a leaf
        for f in 0..self.d() {
            if ctx.px.get(f).is_some() {
                continue;
            }
            let probe_value = match &self.domains[f] {
                FeatureDomain::Continuous => self.grid_value(self.grid_max() / 2),
                FeatureDomain::Categorical(vals) => vals[0],
            };
            if self.probe(&ctx.px.with(f, probe_value))? == id_cur {
                continue;
            }
            return match &self.domains[f] {
                FeatureDomain::Continuous => {
                    let pieces = self.scan_range(&ctx.px, f, 0, self.grid_max())?;
                    self.build_chain(ctx, f, &pieces, Some(id_cur))
                }
                FeatureDomain::Categorical(vals) => {
                    let groups = self.scan_values(&ctx.px, f, vals)?;
                    self.build_values(ctx, f, &groups, Some(id_cur))
                }
            };
        }

        // the oracle never reveals leaf payloads, only ids, so clone
        // leaves carry a placeholder class
        Ok(self.push(TreeNode {
            id: id_cur,
            kind: NodeKind::Leaf {
                label: 0,
                confidence: 1.0,
            },
        }))
    }

    /// Clone subtree for pieces along a continuous feature: a chain of
    /// threshold nodes at the bracket midpoints, descending on the left.
    fn build_chain(
        &mut self,
        ctx: &Context,
        f: usize,
        pieces: &[(u32, u32)],
        top_id: Option<u64>,
    ) -> Result<usize> {
        let children: Vec<usize> = pieces
            .iter()
            .map(|&(lo, hi)| {
                let mid = lo + (hi - lo) / 2;
                let mut sub = ctx.clone();
                sub.px = sub.px.with(f, self.grid_value(mid));
                sub.feasible[f] = Some(Feasible::Range(lo, hi));
                self.expand(&sub)
            })
            .collect::<Result<_>>()?;
        if children.len() == 1 {
            // degenerate split: one side of the tested feature is
            // unreachable, so the node itself cannot be materialized
            return Ok(children[0]);
        }
        let step = 1.0 / self.grid_max() as f64;
        let mut below = children[0];
        for (j, &child) in children.iter().enumerate().skip(1) {
            let last = j == children.len() - 1;
            let id = match (last, top_id) {
                (true, Some(id)) => id,
                _ => self.synthetic_id(),
            };
            let threshold = (pieces[j].0 as f64 - 0.5) * step;
            below = self.push(TreeNode {
                id,
                kind: NodeKind::Split {
                    feature: f,
                    test: SplitTest::Threshold {
                        threshold,
                        left: below,
                        right: child,
                    },
                },
            });
        }
        Ok(below)
    }

    /// Clone subtree for a categorical grouping: one multi-way node whose
    /// arms share a child per response group.
    fn build_values(
        &mut self,
        ctx: &Context,
        f: usize,
        groups: &[(u64, Vec<f64>)],
        top_id: Option<u64>,
    ) -> Result<usize> {
        let mut arms = Vec::new();
        for (_, members) in groups {
            let mut sub = ctx.clone();
            sub.px = sub.px.with(f, members[0]);
            sub.feasible[f] = Some(Feasible::Values(members.clone()));
            let child = self.expand(&sub)?;
            arms.extend(members.iter().map(|&v| (v, child)));
        }
        if groups.len() == 1 {
            return Ok(arms[0].1);
        }
        let id = top_id.unwrap_or_else(|| self.synthetic_id());
        Ok(self.push(TreeNode {
            id,
            kind: NodeKind::Split {
                feature: f,
                test: SplitTest::Values { arms },
            },
        }))
    }

    /// Re-queries a spread of transcript entries, bypassing the memo, and
    /// fails if any answer changed since it was first recorded.
    fn sentinel_check(&mut self) -> Result<()> {
        let n = self.transcript.len();
        if n == 0 {
            return Ok(());
        }
        let mut picks: Vec<usize> = (0..SENTINELS)
            .map(|s| s * (n - 1) / (SENTINELS - 1))
            .collect();
        picks.dedup();
        for idx in picks {
            let earlier = self.transcript[idx].clone();
            let response = self.oracle.query_partial(&earlier.input, "extract-tree")?;
            let consistent = response == earlier.response;
            self.transcript.push(ProbeRecord {
                input: earlier.input,
                response,
            });
            if !consistent {
                return Err(Error::InconsistentOracle);
            }
        }
        Ok(())
    }
}

/// Reconstruct a decision tree behind a tree-id oracle.
///
/// `eps_split` bounds the threshold localization error; the clone's stop
/// ids match the target's on every full input, up to that tolerance around
/// each threshold. Leaf labels are placeholders: this oracle mode reveals
/// structure, not payloads.
///
/// The clone may repeat an observed id across several leaves. The search
/// carves the input space along the boundaries visible on each cross
/// section, and a single target leaf whose box extends past those cuts is
/// rediscovered once per cell. Routing is unaffected; every cell still
/// reports the id the target would. The clone is an evaluation artifact,
/// not a servable model, so the builder's unique-id rule does not apply.
pub fn extract_tree<O: QueryOracle>(
    oracle: &mut O,
    domains: &[FeatureDomain],
    eps_split: f64,
    eval: &FidelityEval,
) -> Result<ExtractionResult> {
    if domains.is_empty() {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if !(eps_split > 0.0 && eps_split < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_split must be in (0,1), got {eps_split}"
        )));
    }
    for (f, dom) in domains.iter().enumerate() {
        if let FeatureDomain::Categorical(vals) = dom {
            if vals.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "feature {f}: empty categorical domain"
                )));
            }
        }
    }
    let k = (1.0 / eps_split).log2().ceil().clamp(1.0, 30.0) as u32;
    let before = oracle.accepted();
    let mut finder = TreeFinder {
        oracle,
        domains,
        k,
        memo: HashMap::new(),
        transcript: Vec::new(),
        nodes: Vec::new(),
        next_synthetic: u64::MAX,
    };
    let root_ctx = Context {
        px: PartialFeatureVector::unspecified(domains.len()),
        feasible: vec![None; domains.len()],
    };
    let root = finder.expand(&root_ctx)?;
    finder.sentinel_check()?;
    let clone = DecisionTree {
        nodes: finder.nodes,
        root,
        d: domains.len(),
        c: 2,
    };
    let transcript = finder.transcript;
    let mut notes = vec![format!(
        "grid 1/2^{k}; leaf labels are placeholders (ids only)"
    )];
    let clone = TargetModel::Tree(clone);
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
