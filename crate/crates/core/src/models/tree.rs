//! Decision trees with oracle-visible node identifiers. Trained trees
//! split on continuous thresholds; the type also admits hand-built
//! categorical (multi-way) nodes for extraction fixtures.

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::feature::PartialFeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    /// Arena index of the root.
    pub root: usize,
    pub d: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// The identifier the tree-id oracle exposes; unique within a tree.
    pub id: u64,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Leaf {
        label: usize,
        confidence: f64,
    },
    Split {
        feature: usize,
        test: SplitTest,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    /// x[feature] < threshold goes left, else right. Children are arena indexes.
    Threshold {
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Multi-way categorical split; each arm is (value, child arena index).
    /// An input routes to the arm whose value is nearest (exact match first).
    Values { arms: Vec<(f64, usize)> },
}

/// Where a traversal stopped: the node's oracle identifier, plus the leaf
/// payload when it stopped at a leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversalStop {
    pub node_id: u64,
    pub leaf: Option<(usize, f64)>,
}

impl DecisionTree {
    fn route(&self, node: &TreeNode, v: f64) -> usize {
        match &node.kind {
            NodeKind::Leaf { .. } => unreachable!("route called on a leaf"),
            NodeKind::Split { test, .. } => match test {
                SplitTest::Threshold { threshold, left, right } => {
                    if v < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                SplitTest::Values { arms } => {
                    let mut best = 0;
                    for (i, (val, _)) in arms.iter().enumerate() {
                        if (v - val).abs() < (v - arms[best].0).abs() {
                            best = i;
                        }
                    }
                    arms[best].1
                }
            },
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: len,
            });
        }
        Ok(())
    }

    /// Leaf reached by a fully specified input.
    pub fn leaf_for(&self, x: &[f64]) -> Result<(usize, f64, u64)> {
        self.check_dim(x.len())?;
        let mut at = self.root;
        loop {
            let node = &self.nodes[at];
            match &node.kind {
                NodeKind::Leaf { label, confidence } => {
                    return Ok((*label, *confidence, node.id))
                }
                NodeKind::Split { feature, .. } => at = self.route(node, x[*feature]),
            }
        }
    }

    /// Distribution with the leaf's confidence on its label and the
    /// remainder spread over the other classes.
    pub(crate) fn leaf_distribution(&self, x: &[f64]) -> Vec<f64> {
        let (label, conf, _) = self.leaf_for(x).expect("dimension checked by caller");
        let mut p = vec![(1.0 - conf) / (self.c - 1) as f64; self.c];
        p[label] = conf;
        p
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, at: usize) -> usize {
            match &t.nodes[at].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { test, .. } => {
                    1 + match test {
                        SplitTest::Threshold { left, right, .. } => {
                            walk(t, *left).max(walk(t, *right))
                        }
                        SplitTest::Values { arms } => arms
                            .iter()
                            .map(|(_, child)| walk(t, *child))
                            .max()
                            .unwrap_or(0),
                    }
                }
            }
        }
        walk(self, self.root)
    }

    /// Structural sanity: unique ids, in-bounds features and children,
    /// thresholds in [0,1], every node reachable from the root.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.nodes.is_empty() || self.root >= self.nodes.len() {
            return fail("empty arena or root out of bounds".into());
        }
        if self.c < 2 {
            return fail(format!("class count {} < 2", self.c));
        }
        let mut ids: Vec<u64> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.nodes.len() {
            return fail("duplicate node ids".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(at) = stack.pop() {
            if seen[at] {
                return fail(format!("node {at} reachable twice"));
            }
            seen[at] = true;
            match &self.nodes[at].kind {
                NodeKind::Leaf { label, confidence } => {
                    if *label >= self.c || !(0.0..=1.0).contains(confidence) {
                        return fail(format!("bad leaf at {at}"));
                    }
                }
                NodeKind::Split { feature, test } => {
                    if *feature >= self.d {
                        return fail(format!("feature {feature} out of range at {at}"));
                    }
                    match test {
                        SplitTest::Threshold { threshold, left, right } => {
                            if !(0.0..=1.0).contains(threshold) {
                                return fail(format!("threshold {threshold} outside [0,1]"));
                            }
                            if *left >= self.nodes.len() || *right >= self.nodes.len() {
                                return fail(format!("child out of bounds at {at}"));
                            }
                            stack.push(*left);
                            stack.push(*right);
                        }
                        SplitTest::Values { arms } => {
                            if arms.len() < 2 {
                                return fail(format!("categorical node {at} has < 2 arms"));
                            }
                            let mut children: Vec<usize> =
                                arms.iter().map(|(_, c)| *c).collect();
                            children.sort_unstable();
                            children.dedup();
                            for child in children {
                                if child >= self.nodes.len() {
                                    return fail(format!("child out of bounds at {at}"));
                                }
                                stack.push(child);
                            }
                        }
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return fail("unreachable nodes in arena".into());
        }
        Ok(())
    }
}

/// Descends until it reaches a leaf or a node testing an unspecified
/// coordinate, and reports where it stopped.
pub fn tree_traverse_partial(
    tree: &DecisionTree,
    px: &PartialFeatureVector,
) -> Result<TraversalStop> {
    tree.check_dim(px.dim())?;
    let mut at = tree.root;
    loop {
        let node = &tree.nodes[at];
        match &node.kind {
            NodeKind::Leaf { label, confidence } => {
                return Ok(TraversalStop {
                    node_id: node.id,
                    leaf: Some((*label, *confidence)),
                })
            }
            NodeKind::Split { feature, .. } => match px.get(*feature) {
                None => {
                    return Ok(TraversalStop {
                        node_id: node.id,
                        leaf: None,
                    })
                }
                Some(v) => at = tree.route(node, v),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeHyper {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeHyper {
    fn default() -> Self {
        TreeHyper {
            max_depth: 8,
            min_leaf: 1,
        }
    }
}

fn entropy(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &ct in counts {
        if ct > 0.0 {
            let p = ct / total;
            h -= p * p.log2();
        }
    }
    h
}

struct TreeBuilder<'a> {
    points: &'a [Vec<f64>],
    labels: &'a [usize],
    weights: &'a [f64],
    c: usize,
    hyper: TreeHyper,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, idx: &[usize]) -> (Vec<f64>, f64) {
        let mut counts = vec![0.0; self.c];
        let mut total = 0.0;
        for &i in idx {
            counts[self.labels[i]] += self.weights[i];
            total += self.weights[i];
        }
        (counts, total)
    }

    fn leaf(&mut self, counts: &[f64], total: f64) -> usize {
        let mut label = 0;
        for k in 1..self.c {
            if counts[k] > counts[label] {
                label = k;
            }
        }
        let confidence = if total > 0.0 { counts[label] / total } else { 1.0 };
        let id = self.nodes.len() as u64;
        self.nodes.push(TreeNode {
            id,
            kind: NodeKind::Leaf { label, confidence },
        });
        self.nodes.len() - 1
    }

    /// Best split of `idx` by information gain; None when nothing
    /// satisfies min_leaf or improves on the parent entropy.
    fn best_split(&self, idx: &[usize], parent_h: f64) -> Option<(usize, f64, f64)> {
        let d = self.points[0].len();
        let (_, total) = self.class_counts(idx);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..d {
            let mut ordered: Vec<usize> = idx.to_vec();
            ordered.sort_by(|&a, &b| {
                self.points[a][f]
                    .partial_cmp(&self.points[b][f])
                    .expect("finite coordinates")
            });
            let mut left_counts = vec![0.0; self.c];
            let mut left_total = 0.0;
            let (mut right_counts, mut right_total) = self.class_counts(idx);
            for (pos, &i) in ordered.iter().enumerate().take(ordered.len() - 1) {
                let w = self.weights[i];
                left_counts[self.labels[i]] += w;
                left_total += w;
                right_counts[self.labels[i]] -= w;
                right_total -= w;
                let (a, b) = (self.points[i][f], self.points[ordered[pos + 1]][f]);
                if a == b {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = ordered.len() - n_left;
                if n_left < self.hyper.min_leaf || n_right < self.hyper.min_leaf {
                    continue;
                }
                let gain = parent_h
                    - (left_total * entropy(&left_counts, left_total)
                        + right_total * entropy(&right_counts, right_total))
                        / total;
                let threshold = 0.5 * (a + b);
                if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let (counts, total) = self.class_counts(idx);
        let parent_h = entropy(&counts, total);
        let pure = counts.iter().filter(|&&ct| ct > 0.0).count() <= 1;
        if depth >= self.hyper.max_depth || pure || idx.len() < 2 * self.hyper.min_leaf {
            return self.leaf(&counts, total);
        }
        let Some((feature, threshold, _)) = self.best_split(idx, parent_h) else {
            return self.leaf(&counts, total);
        };
        // allocate this node before its children: ids in construction order
        let at = self.nodes.len();
        self.nodes.push(TreeNode {
            id: at as u64,
            kind: NodeKind::Leaf {
                label: 0,
                confidence: 1.0,
            },
        });
        let (li, ri): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.points[i][feature] < threshold);
        let left = self.build(&li, depth + 1);
        let right = self.build(&ri, depth + 1);
        self.nodes[at].kind = NodeKind::Split {
            feature,
            test: SplitTest::Threshold {
                threshold,
                left,
                right,
            },
        };
        at
    }
}

/// Greedy information-gain tree induction over continuous features.
pub fn train_tree(train: &LabeledDataset, hyper: &TreeHyper) -> Result<DecisionTree> {
    let weights = vec![1.0; train.points.len()];
    train_tree_weighted(&train.points, &train.labels, &weights, train.d, train.c, hyper)
}

/// Weighted variant used by the self-training defender.
pub fn train_tree_weighted(
    points: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    d: usize,
    c: usize,
    hyper: &TreeHyper,
) -> Result<DecisionTree> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hyper.max_depth == 0 {
        return Err(Error::InvalidHyper("max_depth must be >= 1".into()));
    }
    if hyper.min_leaf == 0 {
        return Err(Error::InvalidHyper("min_leaf must be >= 1".into()));
    }
    let mut b = TreeBuilder {
        points,
        labels,
        weights,
        c,
        hyper: *hyper,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..points.len()).collect();
    let root = b.build(&idx, 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        root,
        d,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TargetModel;

    fn dataset(points: Vec<Vec<f64>>, labels: Vec<usize>, d: usize, c: usize) -> LabeledDataset {
        LabeledDataset {
            points,
            labels,
            d,
            c,
            seed: 0,
        }
    }

    #[test]
    fn pure_dataset_is_single_leaf() {
        let ds = dataset(vec![vec![0.1], vec![0.9]], vec![1, 1], 1, 2);
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(
            t.nodes[0].kind,
            NodeKind::Leaf {
                label: 1,
                confidence: 1.0
            }
        );
        t.validate().unwrap();
    }

    #[test]
    fn stump_recovers_threshold_between_classes() {
        let ds = dataset(
            vec![vec![0.1], vec![0.3], vec![0.7], vec![0.9]],
            vec![0, 0, 1, 1],
            1,
            2,
        );
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        let NodeKind::Split {
            feature,
            test: SplitTest::Threshold { threshold, .. },
        } = t.nodes[t.root].kind
        else {
            panic!("expected a stump split");
        };
        assert_eq!(feature, 0);
        // inter-point gap around 0.5
        assert!(threshold > 0.3 && threshold < 0.7);
        assert_eq!(t.leaf_for(&[0.2]).unwrap().0, 0);
        assert_eq!(t.leaf_for(&[0.8]).unwrap().0, 1);
    }

    #[test]
    fn partial_traversal_stops_at_unspecified_split() {
        let ds = dataset(
            vec![vec![0.1], vec![0.3], vec![0.7], vec![0.9]],
            vec![0, 0, 1, 1],
            1,
            2,
        );
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        let root_id = t.nodes[t.root].id;
        let stop = tree_traverse_partial(&t, &PartialFeatureVector::unspecified(1)).unwrap();
        assert_eq!(stop.node_id, root_id);
        assert_eq!(stop.leaf, None);
        let stop = tree_traverse_partial(&t, &PartialFeatureVector::complete(&[0.2])).unwrap();
        assert!(stop.leaf.is_some());
    }

    #[test]
    fn full_traversal_matches_predict_label() {
        let ds = crate::datagen::gen_gaussian_blobs(13, 60, 3, 2, 0.8).unwrap();
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        t.validate().unwrap();
        let model = TargetModel::Tree(t.clone());
        for x in crate::rng::uniform_points(5, 300, 3) {
            let stop = tree_traverse_partial(&t, &PartialFeatureVector::complete(&x)).unwrap();
            let (label, _) = stop.leaf.unwrap();
            assert_eq!(label, model.predict_label(&x).unwrap());
        }
    }

    #[test]
    fn node_ids_are_construction_order() {
        let ds = crate::datagen::gen_gaussian_blobs(13, 60, 3, 2, 0.8).unwrap();
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        for (i, n) in t.nodes.iter().enumerate() {
            assert_eq!(n.id, i as u64);
        }
    }

    #[test]
    fn categorical_routing_prefers_exact_then_nearest() {
        let t = DecisionTree {
            nodes: vec![
                TreeNode {
                    id: 0,
                    kind: NodeKind::Split {
                        feature: 0,
                        test: SplitTest::Values {
                            arms: vec![(0.0, 1), (0.5, 2), (1.0, 3)],
                        },
                    },
                },
                TreeNode {
                    id: 1,
                    kind: NodeKind::Leaf {
                        label: 0,
                        confidence: 1.0,
                    },
                },
                TreeNode {
                    id: 2,
                    kind: NodeKind::Leaf {
                        label: 1,
                        confidence: 1.0,
                    },
                },
                TreeNode {
                    id: 3,
                    kind: NodeKind::Leaf {
                        label: 0,
                        confidence: 0.75,
                    },
                },
            ],
            root: 0,
            d: 1,
            c: 2,
        };
        t.validate().unwrap();
        assert_eq!(t.leaf_for(&[0.5]).unwrap().2, 2);
        assert_eq!(t.leaf_for(&[0.9]).unwrap().2, 3);
        assert_eq!(t.leaf_for(&[0.1]).unwrap().2, 1);
    }

    #[test]
    fn leaf_distribution_sums_to_one() {
        let ds = crate::datagen::gen_gaussian_blobs(3, 40, 2, 3, 0.9).unwrap();
        let t = train_tree(&ds, &TreeHyper::default()).unwrap();
        let m = TargetModel::Tree(t);
        for x in crate::rng::uniform_points(9, 100, 2) {
            let p = m.predict_proba(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
