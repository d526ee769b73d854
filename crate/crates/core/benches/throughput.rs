//! Throughput of the hot paths.
//!
//! With the default `parallel` feature every workload runs twice: inside a
//! one-thread rayon pool and on the global pool. Building with
//! `--no-default-features` benches the sequential fallback under the
//! `sequential` label.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use disdf::cascade::train_cascade;
use disdf::forest::train_forest;
use disdf::pairstats::{compute_pair_stats, DistTensor};
use disdf::weightopt::{frank_wolfe, ObjectiveParams};
use disdf::{rng, CascadeModel, Dataset, ForestKind, TrainConfig, TreeParams};
use rand::Rng as _;

/// Three Gaussian-ish classes in `dim` dimensions, shifted along axis 0.
fn dataset(n: usize, dim: usize) -> Dataset {
    let mut rng = rng::from_seed(11);
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| {
            (0..dim)
                .map(|j| {
                    let noise: f64 = (0..4).map(|_| rng.gen::<f64>() - 0.5).sum();
                    noise + if j == 0 { 1.5 * c as f64 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    Dataset::from_rows(&rows, labels, 3).unwrap()
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("1-thread", Some(single)), ("pool", None)]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn within<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn within<R: Send>(_pool: &Option<()>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn bench_forest(c: &mut Criterion) {
    let ds = dataset(300, 10);
    let params = TreeParams::default();
    let mut group = c.benchmark_group("train_forest_100_trees");
    group.sample_size(10);
    for (label, pool) in modes() {
        for kind in [ForestKind::Random, ForestKind::CompletelyRandom] {
            group.bench_function(BenchmarkId::new(label, kind.name()), |b| {
                b.iter(|| within(&pool, || train_forest(&ds, kind, 100, &params, &mut rng::from_seed(1)).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_pairs_and_weights(c: &mut Criterion) {
    let ds = dataset(150, 10);
    let forest = train_forest(&ds, ForestKind::Random, 100, &TreeParams::default(), &mut rng::from_seed(2)).unwrap();
    let values = forest.dist_tensor(&ds).unwrap();
    let tensor = DistTensor {
        values: &values,
        trees: 100,
        classes: 3,
    };
    let stats = compute_pair_stats(tensor, ds.labels(), None, &mut rng::from_seed(3)).unwrap();
    let objective = ObjectiveParams::new(&stats, 0.5, 0.01).unwrap();

    let mut group = c.benchmark_group("weights");
    group.sample_size(10);
    for (label, pool) in modes() {
        group.bench_function(BenchmarkId::new(label, "pair_stats_n150_t100"), |b| {
            b.iter(|| within(&pool, || compute_pair_stats(tensor, ds.labels(), None, &mut rng::from_seed(3)).unwrap()))
        });
        group.bench_function(BenchmarkId::new(label, "frank_wolfe_2000"), |b| {
            b.iter(|| within(&pool, || frank_wolfe(black_box(&objective), 2000, None).unwrap()))
        });
    }
    group.finish();
}

fn bench_cascade(c: &mut Criterion) {
    let train = dataset(120, 8);
    let test = dataset(600, 8);
    let cfg = TrainConfig {
        trees_per_forest: 20,
        max_levels: 3,
        fw_iterations: 500,
        ..TrainConfig::default()
    };
    let model: CascadeModel = train_cascade(&train, &cfg, &mut rng::from_seed(4)).unwrap();

    let mut group = c.benchmark_group("cascade");
    group.sample_size(10);
    for (label, pool) in modes() {
        group.bench_function(BenchmarkId::new(label, "train_n120_t20"), |b| {
            b.iter(|| within(&pool, || train_cascade(&train, &cfg, &mut rng::from_seed(4)).unwrap()))
        });
        group.bench_function(BenchmarkId::new(label, "predict_600_rows"), |b| {
            b.iter(|| within(&pool, || model.predict_rows(test.features(), test.feature_dim()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_forest, bench_pairs_and_weights, bench_cascade);
criterion_main!(benches);
