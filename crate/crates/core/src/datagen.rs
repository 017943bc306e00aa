//! Synthetic dataset generators. Everything lives in the box [0,1]^d and is
//! a pure function of its seed: calling a generator twice with equal
//! arguments yields a bit-identical dataset.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{clamp01, FeatureVector};
use crate::models::{DecisionTree, NodeKind, SplitTest, TreeNode};
use crate::rng::{rng, sub_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub points: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    pub d: usize,
    pub c: usize,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Two labeled archetype classes (grades 0 and 1) plus unlabeled variants at
/// intermediate grades. Variant labels in `base` are provisional: grade
/// rounded to the nearest endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumDataset {
    pub base: LabeledDataset,
    pub grades: Vec<f64>,
}

impl ContinuumDataset {
    /// The labeled endpoint points only (grade exactly 0 or 1).
    pub fn endpoints(&self) -> LabeledDataset {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, &g) in self.grades.iter().enumerate() {
            if g == 0.0 || g == 1.0 {
                points.push(self.base.points[i].clone());
                labels.push(self.base.labels[i]);
            }
        }
        LabeledDataset {
            points,
            labels,
            d: self.base.d,
            c: self.base.c,
            seed: self.base.seed,
        }
    }

    /// (grade, point) for the intermediate variants, in generation order.
    pub fn variants(&self) -> Vec<(f64, FeatureVector)> {
        self.grades
            .iter()
            .zip(&self.base.points)
            .filter(|(&g, _)| g > 0.0 && g < 1.0)
            .map(|(&g, x)| (g, x.clone()))
            .collect()
    }
}

/// Class means spaced `separation` apart along a seeded random direction,
/// centered on the middle of the box.
fn blob_means<R: Rng>(r: &mut R, d: usize, c: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut dir = vec![0.0; d];
    loop {
        for v in dir.iter_mut() {
            *v = r.sample(StandardNormal);
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for v in dir.iter_mut() {
                *v /= norm;
            }
            break;
        }
    }
    (0..c)
        .map(|k| {
            let offset = (k as f64 - (c as f64 - 1.0) / 2.0) * separation;
            dir.iter().map(|&u| 0.5 + offset * u).collect()
        })
        .collect()
}

fn gaussian_sample<R: Rng>(r: &mut R, mean: &[f64], sigma: f64) -> FeatureVector {
    mean.iter()
        .map(|&m| {
            let z: f64 = r.sample(StandardNormal);
            clamp01(m + sigma * z)
        })
        .collect()
}

/// `c` Gaussian clusters clipped into the box, one blob per class, in
/// class-major order. Cluster spread is separation/8.
pub fn gen_gaussian_blobs(
    seed: u64,
    n_per_class: usize,
    d: usize,
    c: usize,
    separation: f64,
) -> Result<LabeledDataset> {
    if n_per_class < 1 || d < 1 {
        return Err(Error::InvalidArgument(
            "n_per_class and d must be >= 1".into(),
        ));
    }
    if c < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if !(separation > 0.0) {
        return Err(Error::InvalidArgument("separation must be > 0".into()));
    }
    let mut r = rng(seed);
    let means = blob_means(&mut r, d, c, separation);
    let sigma = separation / 8.0;
    let mut points = Vec::with_capacity(c * n_per_class);
    let mut labels = Vec::with_capacity(c * n_per_class);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            points.push(gaussian_sample(&mut r, mean, sigma));
            labels.push(k);
        }
    }
    Ok(LabeledDataset {
        points,
        labels,
        d,
        c: c.max(2),
        seed,
    })
}

/// Two endpoint blobs plus `n_variants` points interpolating the archetype
/// means at evenly spaced grades i/(n+1), each jittered uniformly within
/// +-separation/8 per coordinate.
pub fn gen_continuum(
    seed: u64,
    n_per_class: usize,
    n_variants: usize,
    d: usize,
) -> Result<ContinuumDataset> {
    if n_per_class < 1 || d < 1 {
        return Err(Error::InvalidArgument(
            "n_per_class and d must be >= 1".into(),
        ));
    }
    let separation = 0.8;
    let sigma = separation / 8.0;
    let mut r = rng(seed);
    let means = blob_means(&mut r, d, 2, separation);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut grades = Vec::new();
    for k in 0..2usize {
        for _ in 0..n_per_class {
            points.push(gaussian_sample(&mut r, &means[k], sigma));
            labels.push(k);
            grades.push(k as f64);
        }
    }
    for i in 1..=n_variants {
        let g = i as f64 / (n_variants + 1) as f64;
        let x: FeatureVector = means[0]
            .iter()
            .zip(&means[1])
            .map(|(&a, &b)| {
                let jitter = r.gen_range(-sigma..=sigma);
                clamp01((1.0 - g) * a + g * b + jitter)
            })
            .collect();
        points.push(x);
        labels.push(g.round() as usize);
        grades.push(g);
    }
    Ok(ContinuumDataset {
        base: LabeledDataset {
            points,
            labels,
            d,
            c: 2,
            seed,
        },
        grades,
    })
}

/// Shape request for the random tree behind [`gen_axis_aligned`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub depth: usize,
    pub samples_per_leaf: usize,
}

struct RandomTreeBuilder<'a, R: Rng> {
    r: &'a mut R,
    d: usize,
    nodes: Vec<TreeNode>,
}

impl<R: Rng> RandomTreeBuilder<'_, R> {
    fn leaf(&mut self) -> usize {
        let id = self.nodes.len() as u64;
        let label = self.r.gen_range(0..2usize);
        self.nodes.push(TreeNode {
            id,
            kind: NodeKind::Leaf {
                label,
                confidence: 1.0,
            },
        });
        self.nodes.len() - 1
    }

    /// Continuous thresholds, kept a margin away from the feasible edges so
    /// no region degenerates.
    fn build_continuous(&mut self, depth_left: usize, bounds: &mut [(f64, f64)]) -> usize {
        let margin = 0.05;
        let candidates: Vec<usize> = (0..self.d)
            .filter(|&f| bounds[f].1 - bounds[f].0 > 2.0 * margin)
            .collect();
        if depth_left == 0 || candidates.is_empty() {
            return self.leaf();
        }
        let feature = candidates[self.r.gen_range(0..candidates.len())];
        let (lo, hi) = bounds[feature];
        let threshold = self.r.gen_range(lo + margin..hi - margin);
        let at = self.nodes.len();
        self.nodes.push(TreeNode {
            id: at as u64,
            kind: NodeKind::Leaf {
                label: 0,
                confidence: 1.0,
            },
        });
        bounds[feature] = (lo, threshold);
        let left = self.build_continuous(depth_left - 1, bounds);
        bounds[feature] = (threshold, hi);
        let right = self.build_continuous(depth_left - 1, bounds);
        bounds[feature] = (lo, hi);
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

    /// Integer grid bounds per feature; thresholds land exactly on
    /// multiples of 1/denom, strictly inside the feasible interval.
    fn build_grid(&mut self, depth_left: usize, denom: u32, bounds: &mut [(u32, u32)]) -> usize {
        let candidates: Vec<usize> = (0..self.d)
            .filter(|&f| bounds[f].1 - bounds[f].0 >= 2)
            .collect();
        if depth_left == 0 || candidates.is_empty() {
            return self.leaf();
        }
        let feature = candidates[self.r.gen_range(0..candidates.len())];
        let (lo, hi) = bounds[feature];
        let k = self.r.gen_range(lo + 1..hi);
        let threshold = k as f64 / denom as f64;
        let at = self.nodes.len();
        self.nodes.push(TreeNode {
            id: at as u64,
            kind: NodeKind::Leaf {
                label: 0,
                confidence: 1.0,
            },
        });
        bounds[feature] = (lo, k);
        let left = self.build_grid(depth_left - 1, denom, bounds);
        bounds[feature] = (k, hi);
        let right = self.build_grid(depth_left - 1, denom, bounds);
        bounds[feature] = (lo, hi);
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

/// Make sure the labeling function is not constant.
fn ensure_two_classes(nodes: &mut [TreeNode]) {
    let mut labels: Vec<usize> = nodes
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Leaf { label, .. } => Some(label),
            _ => None,
        })
        .collect();
    labels.dedup();
    if labels.len() == 1 {
        let flip = 1 - labels[0];
        for n in nodes.iter_mut().rev() {
            if let NodeKind::Leaf { ref mut label, .. } = n.kind {
                *label = flip;
                break;
            }
        }
    }
}

/// Labels drawn from a random axis-aligned tree of the requested depth.
/// Returns the generating tree alongside the data so callers can check
/// oracle equivalence against the ground truth.
pub fn gen_axis_aligned(
    seed: u64,
    spec: &TreeSpec,
    d: usize,
) -> Result<(LabeledDataset, DecisionTree)> {
    if spec.depth < 1 || spec.samples_per_leaf < 1 || d < 1 {
        return Err(Error::InvalidArgument(
            "depth, samples_per_leaf and d must be >= 1".into(),
        ));
    }
    let mut r = rng(seed);
    let mut b = RandomTreeBuilder {
        r: &mut r,
        d,
        nodes: Vec::new(),
    };
    let mut bounds = vec![(0.0, 1.0); d];
    let root = b.build_continuous(spec.depth, &mut bounds);
    let mut nodes = b.nodes;
    ensure_two_classes(&mut nodes);
    let tree = DecisionTree {
        nodes,
        root,
        d,
        c: 2,
    };
    let n = spec.samples_per_leaf * (1usize << spec.depth);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: FeatureVector = (0..d).map(|_| r.gen_range(0.0..1.0)).collect();
        let (label, _, _) = tree.leaf_for(&x)?;
        points.push(x);
        labels.push(label);
    }
    Ok((
        LabeledDataset {
            points,
            labels,
            d,
            c: 2,
            seed,
        },
        tree,
    ))
}

/// Random axis-aligned tree whose thresholds all sit on the k/denom grid.
/// Extraction tests use this to compare recovered thresholds exactly.
pub fn gen_grid_tree(seed: u64, depth: usize, d: usize, denom: u32) -> Result<DecisionTree> {
    if depth < 1 || d < 1 || denom < 2 {
        return Err(Error::InvalidArgument(
            "need depth >= 1, d >= 1, denom >= 2".into(),
        ));
    }
    let mut r = rng(seed);
    let mut b = RandomTreeBuilder {
        r: &mut r,
        d,
        nodes: Vec::new(),
    };
    let mut bounds = vec![(0u32, denom); d];
    let root = b.build_grid(depth, denom, &mut bounds);
    let mut nodes = b.nodes;
    ensure_two_classes(&mut nodes);
    let tree = DecisionTree {
        nodes,
        root,
        d,
        c: 2,
    };
    tree.validate()?;
    Ok(tree)
}

/// Stratified split: seeded per-class shuffle, class proportions preserved
/// within one sample.
pub fn split(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "test_fraction must be in (0, 1)".into(),
        ));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for k in 0..ds.c {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == k).collect();
        if idx.is_empty() {
            continue;
        }
        let mut r = rng(sub_seed(seed, k as u64));
        // Fisher-Yates
        for i in (1..idx.len()).rev() {
            let j = r.gen_range(0..=i);
            idx.swap(i, j);
        }
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        let n_test = n_test.min(idx.len());
        if idx.len() - n_test == 0 {
            return Err(Error::DatasetTooSmall(format!(
                "class {k} would have no training samples"
            )));
        }
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    let take = |idx: &[usize]| LabeledDataset {
        points: idx.iter().map(|&i| ds.points[i].clone()).collect(),
        labels: idx.iter().map(|&i| ds.labels[i]).collect(),
        d: ds.d,
        c: ds.c,
        seed: ds.seed,
    };
    Ok((take(&train_idx), take(&test_idx)))
}

/// CSV export: header `f0,…,f{d-1},label[,grade]`, reals with 9 significant
/// digits.
pub fn dataset_to_csv(ds: &LabeledDataset, grades: Option<&[f64]>) -> String {
    let mut out = String::new();
    for j in 0..ds.d {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label");
    if grades.is_some() {
        out.push_str(",grade");
    }
    out.push('\n');
    for (i, (x, &label)) in ds.points.iter().zip(&ds.labels).enumerate() {
        for v in x {
            out.push_str(&format!("{v:.8e},"));
        }
        out.push_str(&label.to_string());
        if let Some(g) = grades {
            out.push_str(&format!(",{:.8e}", g[i]));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`dataset_to_csv`]. The class count is inferred from the
/// labels present; the seed of a loaded dataset is 0.
pub fn dataset_from_csv(text: &str) -> Result<(LabeledDataset, Option<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let label_at = cols
        .iter()
        .position(|&c| c == "label")
        .ok_or_else(|| Error::Parse("missing label column".into()))?;
    let d = label_at;
    for (j, col) in cols.iter().enumerate().take(d) {
        if *col != format!("f{j}") {
            return Err(Error::Parse(format!("unexpected column {col}")));
        }
    }
    let has_grade = cols.get(label_at + 1) == Some(&"grade");
    let expected_cols = label_at + 1 + usize::from(has_grade);
    if cols.len() != expected_cols {
        return Err(Error::Parse("unexpected trailing columns".into()));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut grades = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols {
            return Err(Error::Parse(format!(
                "row {}: expected {expected_cols} fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let mut x = Vec::with_capacity(d);
        for field in &fields[..d] {
            x.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?,
            );
        }
        let label = fields[d]
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
        if has_grade {
            grades.push(
                fields[d + 1]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?,
            );
        }
        points.push(x);
        labels.push(label);
    }
    if points.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let c = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Ok((
        LabeledDataset {
            points,
            labels,
            d,
            c,
            seed: 0,
        },
        if has_grade { Some(grades) } else { None },
    ))
}
