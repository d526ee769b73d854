#![allow(dead_code)]

use disdf::pairstats::{compute_pair_stats, DistTensor, PairStats};
use disdf::rng::{self, Rng};
use disdf::Dataset;
use rand::Rng as _;

/// Random leaf-like distributions: half one-hot, half dense.
pub fn random_tensor(rng: &mut Rng, n: usize, trees: usize, classes: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(n * trees * classes);
    for _ in 0..n * trees {
        if rng.gen_bool(0.5) {
            let hot = rng.gen_range(0..classes);
            values.extend((0..classes).map(|c| if c == hot { 1.0 } else { 0.0 }));
        } else {
            let raw: Vec<f64> = (0..classes).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            values.extend(raw.iter().map(|v| v / sum));
        }
    }
    values
}

/// Random labels over two classes with at least one same-class and one
/// different-class pair.
pub fn random_labels(rng: &mut Rng, n: usize) -> Vec<usize> {
    assert!(n >= 3);
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        if ones > 0 && ones < n {
            return labels;
        }
    }
}

/// Pair statistics for `n` random samples under `trees` random trees.
pub fn random_stats(seed: u64, n: usize, trees: usize, classes: usize) -> PairStats {
    let mut rng = rng::from_seed(seed);
    let values = random_tensor(&mut rng, n, trees, classes);
    let labels = random_labels(&mut rng, n);
    let tensor = DistTensor {
        values: &values,
        trees,
        classes,
    };
    compute_pair_stats(tensor, &labels, None, &mut rng).unwrap()
}

/// Uniformly random point on the simplex, strictly inside.
pub fn random_simplex(rng: &mut Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-6).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| v / sum).collect()
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `classes` Gaussian blobs in `dim` dimensions, unit variance, centers
/// `separation` apart along the first axis, `per_class` rows each.
pub fn blobs(seed: u64, classes: usize, per_class: usize, dim: usize, separation: f64) -> Dataset {
    let mut rng = rng::from_seed(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let row: Vec<f64> = (0..dim)
                .map(|j| normal(&mut rng) + if j == 0 { separation * c as f64 } else { 0.0 })
                .collect();
            rows.push(row);
            labels.push(c);
        }
    }
    Dataset::from_rows(&rows, labels, classes).unwrap()
}

/// Two well-separated clusters: class 0 near the origin, class 1 near 10.
pub fn separable(seed: u64, n: usize, dim: usize) -> Dataset {
    let mut rng = rng::from_seed(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..dim).map(|_| 10.0 * l as f64 + rng.gen::<f64>()).collect())
        .collect();
    Dataset::from_rows(&rows, labels, 2).unwrap()
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}
