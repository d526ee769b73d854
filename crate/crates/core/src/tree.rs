//! Decision tree induction.
//!
//! Two kinds of trees are grown:
//!
//! - random-split-search trees (the members of a random forest): at each node
//!   `ceil(sqrt(m))` candidate features are drawn and the split with the lowest
//!   weighted Gini impurity among midpoint thresholds is taken;
//! - completely-random trees: one non-constant feature is drawn at random and
//!   the threshold is uniform between its minimum and maximum at the node.
//!
//! Leaves store the class-frequency vector of the training samples that reach
//! them. Routing sends `x[f] <= threshold` to the left child.

use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeKind {
    RandomSplitSearch,
    CompletelyRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Minimum number of samples in each child of a split.
    pub min_leaf: usize,
    /// `None` grows until purity.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 1,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        dist: Box<[f64]>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
    input_dim: usize,
    num_classes: usize,
    kind: TreeKind,
}

impl TreeModel {
    /// Assembles a tree from raw nodes, checking structural invariants.
    pub fn from_nodes(
        nodes: Vec<Node>,
        input_dim: usize,
        num_classes: usize,
        kind: TreeKind,
    ) -> Result<Self> {
        let tree = Self {
            nodes,
            input_dim,
            num_classes,
            kind,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// A single leaf. Mostly useful in tests and for hand-built models.
    pub fn leaf(dist: Vec<f64>, input_dim: usize, kind: TreeKind) -> Result<Self> {
        let num_classes = dist.len();
        Self::from_nodes(
            vec![Node::Leaf { dist: dist.into() }],
            input_dim,
            num_classes,
            kind,
        )
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    /// Leaf distribution reached by `x`.
    pub fn predict_dist(&self, x: &[f64]) -> Result<&[f64]> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(self.leaf_dist(x))
    }

    /// Unchecked routing for hot loops; `x` must have `input_dim` entries.
    pub(crate) fn leaf_dist(&self, x: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { dist } => return dist,
            }
        }
    }

    /// Checks that nodes form a proper binary tree rooted at 0 and that every
    /// leaf holds a probability vector of length `num_classes`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Malformed(msg));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut parents = vec![0u32; self.nodes.len()];
        for node in &self.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= self.input_dim || !threshold.is_finite() {
                        return bad(format!("split on feature {feature} is invalid"));
                    }
                    for &child in [left, right] {
                        if child == 0 || child >= self.nodes.len() {
                            return bad(format!("child id {child} out of range"));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { dist } => {
                    if dist.len() != self.num_classes {
                        return bad("leaf distribution has the wrong length".into());
                    }
                    let sum: f64 = dist.iter().sum();
                    if dist.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                        return bad("leaf distribution is not a probability vector".into());
                    }
                }
            }
        }
        if parents.iter().skip(1).any(|&p| p != 1) {
            return bad("a node does not have exactly one parent".into());
        }
        // Single parents everywhere and a parentless root still allow a
        // detached cycle; reachability rules it out.
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if seen[id] {
                return bad("cycle in node graph".into());
            }
            seen[id] = true;
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push(left);
                stack.push(right);
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable nodes".into());
        }
        Ok(())
    }
}

struct Builder<'a> {
    ds: &'a Dataset,
    params: TreeParams,
    candidates: usize,
    nodes: Vec<Node>,
    // scratch
    order: Vec<usize>,
    pairs: Vec<(f64, usize)>,
    left_counts: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
}

/// Grows one tree on the samples `indices` of `ds` (duplicates allowed, as in
/// a bootstrap sample).
pub fn train_tree(
    ds: &Dataset,
    indices: &[usize],
    kind: TreeKind,
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<TreeModel> {
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = ds.feature_dim();
    let mut b = Builder {
        ds,
        params: TreeParams {
            min_leaf: params.min_leaf.max(1),
            max_depth: params.max_depth,
        },
        candidates: (m as f64).sqrt().ceil() as usize,
        nodes: Vec::new(),
        order: (0..m).collect(),
        pairs: Vec::with_capacity(indices.len()),
        left_counts: vec![0; ds.num_classes()],
    };
    let mut idx = indices.to_vec();
    b.nodes.push(Node::Leaf { dist: Box::new([]) });
    let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
    while let Some((id, start, end, depth)) = stack.pop() {
        let samples = &mut idx[start..end];
        let counts = b.class_counts(samples);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = b.params.max_depth.is_some_and(|d| depth >= d);
        let too_small = samples.len() < 2 * b.params.min_leaf;
        let split = if pure || depth_capped || too_small {
            None
        } else {
            match kind {
                TreeKind::RandomSplitSearch => b.best_split(samples, &counts, rng),
                TreeKind::CompletelyRandom => b.random_split(samples, rng),
            }
        };
        match split {
            None => {
                let n = samples.len() as f64;
                let dist = counts.iter().map(|&c| c as f64 / n).collect();
                b.nodes[id] = Node::Leaf { dist };
            }
            Some(Split { feature, threshold }) => {
                let mid = partition(samples, |i| ds.row(i)[feature] <= threshold);
                debug_assert!(mid > 0 && mid < samples.len());
                let left = b.nodes.len();
                let right = left + 1;
                b.nodes.push(Node::Leaf { dist: Box::new([]) });
                b.nodes.push(Node::Leaf { dist: Box::new([]) });
                b.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push((right, start + mid, end, depth + 1));
                stack.push((left, start, start + mid, depth + 1));
            }
        }
    }
    Ok(TreeModel {
        nodes: b.nodes,
        input_dim: m,
        num_classes: ds.num_classes(),
        kind,
    })
}

fn partition(samples: &mut [usize], goes_left: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..samples.len() {
        if goes_left(samples[k]) {
            samples.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

impl Builder<'_> {
    fn class_counts(&self, samples: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.ds.num_classes()];
        for &i in samples {
            counts[self.ds.label(i)] += 1;
        }
        counts
    }

    /// Best Gini split over `candidates` non-constant features drawn without
    /// replacement. Keeps drawing past constant features until enough usable
    /// ones were examined or all features are exhausted.
    fn best_split(&mut self, samples: &[usize], counts: &[usize], rng: &mut Rng) -> Option<Split> {
        let m = self.order.len();
        let n = samples.len();
        let min_leaf = self.params.min_leaf;
        let total_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        let mut best: Option<(f64, Split)> = None;
        let mut examined = 0;
        for j in 0..m {
            if examined >= self.candidates {
                break;
            }
            let pick = rng.gen_range(j..m);
            self.order.swap(j, pick);
            let feature = self.order[j];

            self.pairs.clear();
            self.pairs
                .extend(samples.iter().map(|&i| (self.ds.row(i)[feature], self.ds.label(i))));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[n - 1].0 {
                continue;
            }
            examined += 1;

            self.left_counts.iter_mut().for_each(|c| *c = 0);
            let mut left_sq = 0.0;
            let mut right_sq = total_sq;
            for k in 0..n - 1 {
                let c = self.pairs[k].1;
                let lc = self.left_counts[c];
                let rc = counts[c] - lc;
                left_sq += (2 * lc + 1) as f64;
                right_sq -= (2 * rc - 1) as f64;
                self.left_counts[c] = lc + 1;

                let (lo, hi) = (self.pairs[k].0, self.pairs[k + 1].0);
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                // Maximizing sum_c n_c^2 / n_side is minimizing weighted Gini.
                let score = left_sq / n_left as f64 + right_sq / (n - n_left) as f64;
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, Split { feature, threshold }));
                }
            }
        }
        best.map(|(_, s)| s)
    }

    /// Uniform feature among the non-constant ones, uniform threshold in
    /// `[min, max)`.
    fn random_split(&mut self, samples: &[usize], rng: &mut Rng) -> Option<Split> {
        let m = self.order.len();
        for j in 0..m {
            let pick = rng.gen_range(j..m);
            self.order.swap(j, pick);
            let feature = self.order[j];
            let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.ds.row(i)[feature];
                (lo.min(v), hi.max(v))
            });
            if lo < hi {
                let threshold = rng.gen_range(lo..hi);
                return Some(Split { feature, threshold });
            }
        }
        None
    }
}
