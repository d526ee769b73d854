//! Pairwise per-tree statistics for one forest.
//!
//! For samples `i < j` and tree `t` with class distributions `p_i`, `p_j`:
//!
//! - `P[t] = sum_c (p_ic - p_jc)^2` (squared Euclidean),
//! - `Q[t] = sum_c |p_ic - p_jc|` (Manhattan),
//! - `z = 0` for same-class pairs and `1` otherwise,
//! - `pi[t] = sum over same-class pairs of P[t]`.
//!
//! Under tree weights `w`, the squared Euclidean distance between the
//! forest's class vectors is bounded by `<P, w^2>` terms and the Manhattan
//! distance used in the hinge is `<Q, w>`.

use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    /// `z_ij`: true when the labels differ.
    pub different: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pairs: Vec<Pair>,
    num_trees: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    pi: Vec<f64>,
}

impl PairStats {
    /// Builds stats from explicit per-pair rows (`P` and `Q` are
    /// `pairs.len() x num_trees`, row-major) and aggregates `pi`.
    pub fn from_rows(pairs: Vec<Pair>, num_trees: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let expected = pairs.len() * num_trees;
        for len in [p.len(), q.len()] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, actual: len });
            }
        }
        let mut pi = vec![0.0; num_trees];
        for (pair, row) in pairs.iter().zip(p.chunks_exact(num_trees.max(1))) {
            if !pair.different {
                pi.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
            }
        }
        Ok(Self {
            pairs,
            num_trees,
            p,
            q,
            pi,
        })
    }

    /// No pairs at all; only the regularizer remains in the objective.
    pub fn empty(num_trees: usize) -> Self {
        Self {
            pairs: Vec::new(),
            num_trees,
            p: Vec::new(),
            q: Vec::new(),
            pi: vec![0.0; num_trees],
        }
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_trees(&self) -> usize {
        self.num_trees
    }

    pub fn num_different(&self) -> usize {
        self.pairs.iter().filter(|p| p.different).count()
    }

    pub fn p_row(&self, k: usize) -> &[f64] {
        &self.p[k * self.num_trees..(k + 1) * self.num_trees]
    }

    pub fn q_row(&self, k: usize) -> &[f64] {
        &self.q[k * self.num_trees..(k + 1) * self.num_trees]
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Mean Manhattan class-vector distance `<Q_ij, w>` over same-class
    /// (`different = false`) or different-class pairs. `None` if there are
    /// no such pairs.
    pub fn mean_manhattan(&self, w: &[f64], different: bool) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (k, pair) in self.pairs.iter().enumerate() {
            if pair.different == different {
                sum += dot(self.q_row(k), w);
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tree outputs for `n` samples, laid out `n x trees x classes`.
#[derive(Debug, Clone, Copy)]
pub struct DistTensor<'a> {
    pub values: &'a [f64],
    pub trees: usize,
    pub classes: usize,
}

impl DistTensor<'_> {
    fn block(&self, i: usize) -> &[f64] {
        let len = self.trees * self.classes;
        &self.values[i * len..(i + 1) * len]
    }
}

const CHUNK: usize = 512;

/// Computes `P`, `Q` and `pi` for every pair of samples, or for a uniform
/// random subset of `pair_budget` pairs that keeps at least one same-class
/// and one different-class pair.
pub fn compute_pair_stats(
    dists: DistTensor<'_>,
    labels: &[usize],
    pair_budget: Option<usize>,
    rng: &mut Rng,
) -> Result<PairStats> {
    let n = labels.len();
    if dists.values.len() != n * dists.trees * dists.classes {
        return Err(Error::DimensionMismatch {
            expected: n * dists.trees * dists.classes,
            actual: dists.values.len(),
        });
    }
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(Pair {
                i,
                j,
                different: labels[i] != labels[j],
            });
        }
    }
    let n_diff = pairs.iter().filter(|p| p.different).count();
    if n_diff == 0 {
        return Err(Error::DegeneratePairSet("same-class"));
    }
    if n_diff == pairs.len() {
        return Err(Error::DegeneratePairSet("different-class"));
    }

    if let Some(budget) = pair_budget.filter(|&b| b < pairs.len()) {
        pairs = subsample_pairs(pairs, budget.max(2), rng);
    }

    let t = dists.trees;
    let c = dists.classes;
    let chunks = par::map_indexed(pairs.len().div_ceil(CHUNK), |ci| {
        let slice = &pairs[ci * CHUNK..((ci + 1) * CHUNK).min(pairs.len())];
        let mut p = Vec::with_capacity(slice.len() * t);
        let mut q = Vec::with_capacity(slice.len() * t);
        for pair in slice {
            let (a, b) = (dists.block(pair.i), dists.block(pair.j));
            for (ra, rb) in a.chunks_exact(c).zip(b.chunks_exact(c)) {
                let mut sq = 0.0;
                let mut ab = 0.0;
                for (x, y) in ra.iter().zip(rb) {
                    let d = x - y;
                    sq += d * d;
                    ab += d.abs();
                }
                p.push(sq);
                q.push(ab);
            }
        }
        (p, q)
    });
    let mut p = Vec::with_capacity(pairs.len() * t);
    let mut q = Vec::with_capacity(pairs.len() * t);
    for (pc, qc) in chunks {
        p.extend_from_slice(&pc);
        q.extend_from_slice(&qc);
    }
    PairStats::from_rows(pairs, t, p, q)
}

fn subsample_pairs(all: Vec<Pair>, budget: usize, rng: &mut Rng) -> Vec<Pair> {
    let mut picked: Vec<usize> = index::sample(rng, all.len(), budget).into_vec();
    picked.sort_unstable();
    let diff = picked.iter().filter(|&&k| all[k].different).count();
    if diff == 0 || diff == picked.len() {
        // Swap one slot for a random pair of the missing kind.
        let want_diff = diff == 0;
        let candidates: Vec<usize> = (0..all.len()).filter(|&k| all[k].different == want_diff).collect();
        let slot = rng.gen_range(0..picked.len());
        picked[slot] = candidates[rng.gen_range(0..candidates.len())];
        picked.sort_unstable();
    }
    picked.into_iter().map(|k| all[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn one_hot_disagreement() {
        let values = [1.0, 0.0, 0.0, 1.0];
        let d = DistTensor { values: &values, trees: 1, classes: 2 };
        // labels differ, and a second same-class pair is needed; add a third sample
        let values3 = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let d3 = DistTensor { values: &values3, trees: 1, classes: 2 };
        let s = compute_pair_stats(d3, &[0, 1, 0], None, &mut rng::from_seed(0)).unwrap();
        assert_eq!(s.pairs()[0], Pair { i: 0, j: 1, different: true });
        assert_eq!(s.p_row(0), &[2.0]);
        assert_eq!(s.q_row(0), &[2.0]);
        // (0, 2) identical distributions
        assert_eq!(s.p_row(1), &[0.0]);
        assert_eq!(s.q_row(1), &[0.0]);
        assert!(matches!(
            compute_pair_stats(d, &[0, 1], None, &mut rng::from_seed(0)),
            Err(Error::DegeneratePairSet(_))
        ));
    }

    #[test]
    fn pi_matches_brute_force() {
        let values = [0.9, 0.1, 0.7, 0.3, 0.2, 0.8, 0.4, 0.6];
        let labels = [0, 0, 1, 1];
        let d = DistTensor { values: &values, trees: 1, classes: 2 };
        let s = compute_pair_stats(d, &labels, None, &mut rng::from_seed(0)).unwrap();
        assert_eq!(s.num_pairs(), 6);
        let mut brute = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i < j && labels[i] == labels[j] {
                    brute += (values[2 * i] - values[2 * j]).powi(2) + (values[2 * i + 1] - values[2 * j + 1]).powi(2);
                }
            }
        }
        // (0.2^2 * 2) + (0.2^2 * 2) = 0.16
        assert_abs_diff_eq!(brute, 0.16, epsilon = 1e-12);
        assert_abs_diff_eq!(s.pi()[0], brute, epsilon = 1e-12);
    }

    #[test]
    fn single_class_is_degenerate() {
        let values = [0.5, 0.5, 0.1, 0.9, 0.3, 0.7];
        let d = DistTensor { values: &values, trees: 1, classes: 2 };
        assert!(matches!(
            compute_pair_stats(d, &[1, 1, 1], None, &mut rng::from_seed(0)),
            Err(Error::DegeneratePairSet("same-class"))
        ));
    }

    #[test]
    fn budget_keeps_both_kinds() {
        // 30 samples, one of class 1: only 29 of 435 pairs are different-class
        let n = 30;
        let mut labels = vec![0; n];
        labels[7] = 1;
        let values: Vec<f64> = (0..n).flat_map(|i| [i as f64 / n as f64, 1.0 - i as f64 / n as f64]).collect();
        let d = DistTensor { values: &values, trees: 1, classes: 2 };
        for seed in 0..50 {
            let s = compute_pair_stats(d, &labels, Some(3), &mut rng::from_seed(seed)).unwrap();
            assert_eq!(s.num_pairs(), 3);
            let diff = s.num_different();
            assert!((1..=2).contains(&diff), "seed {seed}: {diff}");
        }
        let full = compute_pair_stats(d, &labels, Some(10_000), &mut rng::from_seed(0)).unwrap();
        assert_eq!(full.num_pairs(), n * (n - 1) / 2);
    }

    fn random_tensor(seed: u64, n: usize, t: usize, c: usize) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        let mut v = Vec::with_capacity(n * t * c);
        for _ in 0..n * t {
            let raw: Vec<f64> = (0..c).map(|_| r.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            v.extend(raw.iter().map(|x| x / s));
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn stats_invariants(seed in any::<u64>(), n in 3usize..12, t in 1usize..6, c in 2usize..5) {
            let values = random_tensor(seed, n, t, c);
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let d = DistTensor { values: &values, trees: t, classes: c };
            let s = compute_pair_stats(d, &labels, None, &mut rng::from_seed(seed)).unwrap();
            let mut pi = vec![0.0; t];
            for (k, pair) in s.pairs().iter().enumerate() {
                prop_assert!(pair.i < pair.j);
                prop_assert_eq!(pair.different, labels[pair.i] != labels[pair.j]);
                for (tt, acc) in pi.iter_mut().enumerate() {
                    let (p, q) = (s.p_row(k)[tt], s.q_row(k)[tt]);
                    prop_assert!((0.0..=2.0 + 1e-12).contains(&p));
                    prop_assert!((0.0..=2.0 + 1e-12).contains(&q));
                    prop_assert!(p <= q + 1e-12);
                    if !pair.different {
                        *acc += p;
                    }
                }
                // symmetry: recompute with the roles of i and j swapped
                let swapped = [pair.j, pair.i];
                let block = |i: usize| &values[i * t * c..(i + 1) * t * c];
                for tt in 0..t {
                    let (a, b) = (&block(swapped[0])[tt * c..(tt + 1) * c], &block(swapped[1])[tt * c..(tt + 1) * c]);
                    let p: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                    let q: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                    prop_assert!((p - s.p_row(k)[tt]).abs() < 1e-15);
                    prop_assert!((q - s.q_row(k)[tt]).abs() < 1e-15);
                }
            }
            for (&got, &want) in s.pi().iter().zip(&pi) {
                prop_assert!(got >= 0.0);
                prop_assert!((got - want).abs() < 1e-9);
            }
        }
    }
}
