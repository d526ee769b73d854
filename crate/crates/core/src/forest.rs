//! Forests of decision trees and their class vectors.

use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Rng};
use crate::tree::{train_tree, TreeKind, TreeModel, TreeParams};

/// Tolerance accepted on the sum of caller-supplied weights.
pub const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForestKind {
    /// Bootstrap samples, Gini split search over `sqrt(m)` candidate features.
    Random,
    /// Full data, random feature and threshold at every node.
    CompletelyRandom,
}

impl ForestKind {
    pub fn tree_kind(self) -> TreeKind {
        match self {
            ForestKind::Random => TreeKind::RandomSplitSearch,
            ForestKind::CompletelyRandom => TreeKind::CompletelyRandom,
        }
    }

    pub fn bootstrap(self) -> bool {
        matches!(self, ForestKind::Random)
    }

    pub fn name(self) -> &'static str {
        match self {
            ForestKind::Random => "random",
            ForestKind::CompletelyRandom => "completely-random",
        }
    }
}

/// Point on the unit simplex: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Accepts weights whose sum is within [`SIMPLEX_TOL`] of one and
    /// rescales them onto the simplex.
    // negated comparisons so that NaN fails
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if values.is_empty() || !(min >= 0.0) || !((sum - 1.0).abs() <= SIMPLEX_TOL) {
            return Err(Error::OffSimplex { sum, min });
        }
        Ok(Self(values.into_iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "weight vector must be non-empty");
        Self(vec![1.0 / len as f64; len])
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        assert!(index < len);
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        Self(v)
    }

    /// Wraps values already known to lie on the simplex (optimizer output).
    pub(crate) fn from_simplex(values: Vec<f64>) -> Self {
        debug_assert!(is_on_simplex(&values, 1e-9));
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn is_on_simplex(w: &[f64], tol: f64) -> bool {
    w.iter().all(|&v| v >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// `v_c = sum_t w_t * p[t][c]` for a row-major `T x C` block of tree outputs.
pub fn weighted_combine(dists: &[f64], weights: &[f64], num_classes: usize, out: &mut [f64]) {
    debug_assert_eq!(dists.len(), weights.len() * num_classes);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (row, &w) in dists.chunks_exact(num_classes).zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(row) {
            *o += w * p;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    kind: ForestKind,
    weights: WeightVector,
    num_classes: usize,
    input_dim: usize,
}

impl ForestModel {
    pub fn from_parts(trees: Vec<TreeModel>, kind: ForestKind, weights: WeightVector) -> Result<Self> {
        let first = trees.first().ok_or(Error::EmptyDataset)?;
        let (input_dim, num_classes) = (first.input_dim(), first.num_classes());
        if trees
            .iter()
            .any(|t| t.input_dim() != input_dim || t.num_classes() != num_classes)
        {
            return Err(Error::Malformed("trees disagree on input or class dimension".into()));
        }
        if weights.len() != trees.len() {
            return Err(Error::DimensionMismatch {
                expected: trees.len(),
                actual: weights.len(),
            });
        }
        Ok(Self {
            trees,
            kind,
            weights,
            num_classes,
            input_dim,
        })
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn kind(&self) -> ForestKind {
        self.kind
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn set_weights(&mut self, weights: WeightVector) -> Result<()> {
        if weights.len() != self.trees.len() {
            return Err(Error::DimensionMismatch {
                expected: self.trees.len(),
                actual: weights.len(),
            });
        }
        self.weights = weights;
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Per-tree class distributions for `x`, row-major `T x C`.
    pub fn tree_dists(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.trees.len() * self.num_classes];
        self.tree_dists_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn tree_dists_into(&self, x: &[f64], out: &mut [f64]) {
        for (tree, row) in self.trees.iter().zip(out.chunks_exact_mut(self.num_classes)) {
            row.copy_from_slice(tree.leaf_dist(x));
        }
    }

    /// Class vector under the forest's own weights.
    pub fn class_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.class_vector_with(x, &self.weights)
    }

    /// Class vector `v_c = sum_t w_t p_c^(t)` under explicit weights.
    pub fn class_vector_with(&self, x: &[f64], w: &WeightVector) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if w.len() != self.trees.len() {
            return Err(Error::DimensionMismatch {
                expected: self.trees.len(),
                actual: w.len(),
            });
        }
        let mut out = vec![0.0; self.num_classes];
        self.class_vector_into(x, w.as_slice(), &mut out);
        Ok(out)
    }

    pub(crate) fn class_vector_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (tree, &wt) in self.trees.iter().zip(w) {
            if wt == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(tree.leaf_dist(x)) {
                *o += wt * p;
            }
        }
    }

    /// Tree outputs for every row of `ds`, laid out `n x T x C`.
    pub fn dist_tensor(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.feature_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: ds.feature_dim(),
            });
        }
        let block = self.trees.len() * self.num_classes;
        let rows = par::map_indexed(ds.len(), |i| {
            let mut out = vec![0.0; block];
            self.tree_dists_into(ds.row(i), &mut out);
            out
        });
        Ok(rows.concat())
    }
}

/// Trains `num_trees` trees on all of `ds`; weights start uniform.
pub fn train_forest(
    ds: &Dataset,
    kind: ForestKind,
    num_trees: usize,
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<ForestModel> {
    let all: Vec<usize> = (0..ds.len()).collect();
    train_forest_on(ds, &all, kind, num_trees, params, rng)
}

/// Trains on the rows `indices` of `ds`.
pub fn train_forest_on(
    ds: &Dataset,
    indices: &[usize],
    kind: ForestKind,
    num_trees: usize,
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<ForestModel> {
    if num_trees == 0 {
        return Err(Error::InvalidConfig("a forest needs at least one tree".into()));
    }
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    // Seeds are drawn up front so the forest does not depend on scheduling.
    let seeds: Vec<u64> = (0..num_trees).map(|_| rng.gen()).collect();
    let trees = par::map_slice(&seeds, |&seed| {
        let mut tree_rng = rng::from_seed(seed);
        if kind.bootstrap() {
            let n = indices.len();
            let sample: Vec<usize> = (0..n).map(|_| indices[tree_rng.gen_range(0..n)]).collect();
            train_tree(ds, &sample, kind.tree_kind(), params, &mut tree_rng)
        } else {
            train_tree(ds, indices, kind.tree_kind(), params, &mut tree_rng)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    ForestModel::from_parts(trees, kind, WeightVector::uniform(num_trees))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Three single-leaf trees with the leaf percentages of the worked
    /// three-class example.
    fn figure_forest() -> ForestModel {
        let dists = [[0.4, 0.4, 0.2], [0.2, 0.5, 0.3], [1.0, 0.0, 0.0]];
        let trees = dists
            .iter()
            .map(|d| TreeModel::leaf(d.to_vec(), 2, TreeKind::RandomSplitSearch).unwrap())
            .collect();
        ForestModel::from_parts(trees, ForestKind::Random, WeightVector::uniform(3)).unwrap()
    }

    fn blobs(seed: u64, n: usize) -> Dataset {
        let mut r = rng::from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let shift = if i % 2 == 0 { 0.0 } else { 1.5 };
                (0..3).map(|_| shift + r.gen_range(-1.0..1.0)).collect()
            })
            .collect();
        Dataset::from_rows(&rows, (0..n).map(|i| i % 2).collect(), 2).unwrap()
    }

    #[test]
    fn tree_dist_rows() {
        let f = figure_forest();
        let d = f.tree_dists(&[0.0, 0.0]).unwrap();
        assert_eq!(d, vec![0.4, 0.4, 0.2, 0.2, 0.5, 0.3, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_weights_give_the_tree_mean() {
        let f = figure_forest();
        let v = f.class_vector(&[0.0, 0.0]).unwrap();
        let expected = [1.6 / 3.0, 0.9 / 3.0, 0.5 / 3.0];
        for (a, b) in v.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(v[0], 0.5333, epsilon = 1e-4);
        assert_abs_diff_eq!(v[1], 0.3000, epsilon = 1e-4);
        assert_abs_diff_eq!(v[2], 0.1667, epsilon = 1e-4);
    }

    #[test]
    fn explicit_weights() {
        let f = figure_forest();
        let w = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let v = f.class_vector_with(&[0.0, 0.0], &w).unwrap();
        // 0.4*0.5 + 0.2*0.3 + 1.0*0.2, etc.
        for (a, b) in v.iter().zip([0.46, 0.35, 0.19]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let v = f.class_vector_with(&[0.0, 0.0], &WeightVector::one_hot(3, 1)).unwrap();
        assert_eq!(v, vec![0.2, 0.5, 0.3]);
    }

    #[test]
    fn weight_validation() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.2, -0.2]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        let w = WeightVector::new(vec![0.5, 0.5 + 5e-7]).unwrap();
        assert!(is_on_simplex(w.as_slice(), 1e-12));
        let f = figure_forest();
        assert!(f.class_vector_with(&[0.0, 0.0], &WeightVector::uniform(2)).is_err());
        assert!(f.class_vector(&[0.0]).is_err());
    }

    #[test]
    fn singleton_and_uniform_init() {
        let ds = blobs(1, 40);
        let f = train_forest(&ds, ForestKind::Random, 1, &TreeParams::default(), &mut rng::from_seed(0)).unwrap();
        assert_eq!(f.weights().as_slice(), &[1.0]);
        let x = ds.row(0);
        assert_eq!(f.tree_dists(x).unwrap(), f.trees()[0].predict_dist(x).unwrap());

        let f = train_forest(&ds, ForestKind::CompletelyRandom, 100, &TreeParams::default(), &mut rng::from_seed(0))
            .unwrap();
        assert_eq!(f.num_trees(), 100);
        assert!(f.weights().as_slice().iter().all(|&w| w == 0.01));
        assert!(train_forest(&ds, ForestKind::Random, 0, &TreeParams::default(), &mut rng::from_seed(0)).is_err());
    }

    #[test]
    fn forests_are_deterministic() {
        let ds = blobs(2, 60);
        for kind in [ForestKind::Random, ForestKind::CompletelyRandom] {
            let a = train_forest(&ds, kind, 12, &TreeParams::default(), &mut rng::from_seed(5)).unwrap();
            let b = train_forest(&ds, kind, 12, &TreeParams::default(), &mut rng::from_seed(5)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dist_tensor_layout() {
        let ds = blobs(3, 10);
        let f = train_forest(&ds, ForestKind::Random, 4, &TreeParams::default(), &mut rng::from_seed(1)).unwrap();
        let t = f.dist_tensor(&ds).unwrap();
        assert_eq!(t.len(), 10 * 4 * 2);
        assert_eq!(&t[3 * 8..4 * 8], f.tree_dists(ds.row(3)).unwrap().as_slice());
    }

    proptest! {
        #[test]
        fn class_vectors_are_distributions(seed in any::<u64>(), raw in prop::collection::vec(0.0f64..1.0, 8)) {
            let ds = blobs(seed, 30);
            let f = train_forest(&ds, ForestKind::Random, 8, &TreeParams::default(), &mut rng::from_seed(seed)).unwrap();
            let sum: f64 = raw.iter().sum::<f64>() + 1e-9;
            let w = WeightVector::new(raw.iter().map(|v| (v + 1e-9 / 8.0) / sum).collect()).unwrap();
            let x = [0.3, -0.2, 1.1];
            for row in f.tree_dists(&x).unwrap().chunks(2) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let v = f.class_vector_with(&x, &w).unwrap();
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(v.iter().all(|&p| p >= 0.0));

            let mean = f.class_vector_with(&x, &WeightVector::uniform(8)).unwrap();
            let dists = f.tree_dists(&x).unwrap();
            for c in 0..2 {
                let avg = dists.chunks(2).map(|r| r[c]).sum::<f64>() / 8.0;
                prop_assert!((mean[c] - avg).abs() < 1e-12);
            }
        }
    }
}
