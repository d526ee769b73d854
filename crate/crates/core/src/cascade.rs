//! Level-by-level cascade training, augmentation and prediction.
//!
//! Level `q` consumes vectors of dimension `m + sum_{q' < q} M_q' * C` and
//! appends one `C`-dimensional class vector per forest. Training-time class
//! vectors come from k-fold out-of-fold tree distributions; the deployed
//! forests are refit on every training row and inherit the fitted weights by
//! tree position.

use rand::Rng as _;

use crate::config::TrainConfig;
use crate::data::{kfold_indices, Dataset};
use crate::error::{Error, Result};
use crate::forest::{train_forest, train_forest_on, weighted_combine, ForestKind, ForestModel, WeightVector};
use crate::pairstats::{compute_pair_stats, DistTensor};
use crate::par;
use crate::rng::{self, Rng};
use crate::weightopt::{frank_wolfe, objective, ObjectiveParams};

pub use crate::config::Mode;

/// Minimum score gain that counts as an improvement for early stopping.
pub const IMPROVEMENT_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelModel {
    forests: Vec<ForestModel>,
    input_dim: usize,
    num_classes: usize,
}

impl LevelModel {
    pub fn new(forests: Vec<ForestModel>) -> Result<Self> {
        let first = forests
            .first()
            .ok_or_else(|| Error::Malformed("a level needs at least one forest".into()))?;
        let (input_dim, num_classes) = (first.input_dim(), first.num_classes());
        if forests
            .iter()
            .any(|f| f.input_dim() != input_dim || f.num_classes() != num_classes)
        {
            return Err(Error::Malformed("forests of a level disagree on dimensions".into()));
        }
        Ok(Self {
            forests,
            input_dim,
            num_classes,
        })
    }

    pub fn forests(&self) -> &[ForestModel] {
        &self.forests
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.input_dim + self.forests.len() * self.num_classes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
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

    /// Class vectors of every forest, concatenated in forest order.
    pub fn class_vectors(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.forests.len() * self.num_classes];
        self.class_vectors_into(x, &mut out);
        Ok(out)
    }

    fn class_vectors_into(&self, x: &[f64], out: &mut [f64]) {
        for (forest, block) in self.forests.iter().zip(out.chunks_exact_mut(self.num_classes)) {
            forest.class_vector_into(x, forest.weights().as_slice(), block);
        }
    }

    /// `x` followed by the level's class vectors.
    pub fn augment(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.output_dim()];
        out[..self.input_dim].copy_from_slice(x);
        self.class_vectors_into(x, &mut out[self.input_dim..]);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    levels: Vec<LevelModel>,
    base_dim: usize,
    num_classes: usize,
    mode: Mode,
    class_names: Vec<String>,
    config: TrainConfig,
}

impl CascadeModel {
    /// Assembles a model, checking the dimension recurrence between levels.
    pub fn new(
        levels: Vec<LevelModel>,
        mode: Mode,
        class_names: Vec<String>,
        config: TrainConfig,
    ) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::Malformed("a cascade needs at least one level".into()))?;
        let (base_dim, num_classes) = (first.input_dim(), first.num_classes());
        let mut expected = base_dim;
        for level in &levels {
            if level.input_dim() != expected || level.num_classes() != num_classes {
                return Err(Error::Malformed(format!(
                    "level expects input dimension {} but the previous level emits {expected}",
                    level.input_dim()
                )));
            }
            expected = level.output_dim();
        }
        if class_names.len() != num_classes {
            return Err(Error::Malformed(format!(
                "{} class names for {num_classes} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            levels,
            base_dim,
            num_classes,
            mode,
            class_names,
            config,
        })
    }

    pub fn levels(&self) -> &[LevelModel] {
        &self.levels
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Configuration the model was trained with.
    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Final-level class vectors summed componentwise.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.base_dim {
            return Err(Error::DimensionMismatch {
                expected: self.base_dim,
                actual: x.len(),
            });
        }
        let (last, inner) = self.levels.split_last().expect("at least one level");
        let mut cur = x.to_vec();
        for level in inner {
            cur = level.augment(&cur)?;
        }
        let vectors = last.class_vectors(&cur)?;
        Ok(sum_blocks(&vectors, self.num_classes))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Predictions for every row of `ds`, in row order.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<usize>> {
        self.predict_rows(ds.features(), ds.feature_dim())
    }

    /// Predictions for a row-major matrix of width `dim`.
    pub fn predict_rows(&self, features: &[f64], dim: usize) -> Result<Vec<usize>> {
        if dim != self.base_dim {
            return Err(Error::DimensionMismatch {
                expected: self.base_dim,
                actual: dim,
            });
        }
        if features.is_empty() {
            return Ok(Vec::new());
        }
        let rows: Vec<&[f64]> = features.chunks_exact(dim).collect();
        par::map_slice(&rows, |x| self.predict(x)).into_iter().collect()
    }
}

/// Componentwise sum of consecutive `width`-sized blocks.
fn sum_blocks(values: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for block in values.chunks_exact(width) {
        for (o, v) in out.iter_mut().zip(block) {
            *o += v;
        }
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the best score, where a later score must beat the best so far
/// by more than [`IMPROVEMENT_EPS`].
pub fn best_level(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b] + IMPROVEMENT_EPS) {
            best = Some(i);
        }
    }
    best
}

/// True once `patience` levels have passed without improving the best score.
pub fn should_stop(scores: &[f64], patience: usize) -> bool {
    match best_level(scores) {
        Some(best) => scores.len() - 1 - best >= patience,
        None => false,
    }
}

/// Diagnostics of one forest's weight fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestReport {
    pub kind: ForestKind,
    /// Objective at uniform and at the deployed weights; `None` in baseline mode.
    pub objective_uniform: Option<f64>,
    pub objective_trained: Option<f64>,
    /// Frank-Wolfe duality gap at its final iterate.
    pub gap: Option<f64>,
    /// The solver's final iterate scored worse than uniform and was discarded.
    pub kept_uniform: bool,
    /// Mean Manhattan class-vector distances over same- and different-class
    /// pairs, under uniform and under deployed weights.
    pub same_uniform: Option<f64>,
    pub same_trained: Option<f64>,
    pub different_uniform: Option<f64>,
    pub different_trained: Option<f64>,
    /// Total squared Euclidean class-vector distance over same-class pairs,
    /// `<pi, w^2>`, under uniform and under deployed weights.
    pub pull_uniform: Option<f64>,
    pub pull_trained: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    /// Out-of-fold accuracy of the level's summed class vectors.
    pub score: f64,
    pub forests: Vec<ForestReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Every level trained, including ones truncated away.
    pub levels: Vec<LevelReport>,
    /// Number of levels in the returned model.
    pub kept_levels: usize,
}

struct TrainedForest {
    forest: ForestModel,
    /// Out-of-fold class vectors under the fitted weights, `n x C`.
    oof: Vec<f64>,
    report: ForestReport,
}

pub fn train_cascade(train: &Dataset, cfg: &TrainConfig, rng: &mut Rng) -> Result<CascadeModel> {
    train_cascade_with_report(train, cfg, rng).map(|(model, _)| model)
}

/// Trains the cascade greedily, one level at a time, and returns per-level
/// diagnostics alongside the model.
pub fn train_cascade_with_report(
    train: &Dataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(CascadeModel, TrainReport)> {
    cfg.validate()?;
    let n = train.len();
    if n < cfg.folds {
        return Err(Error::InvalidFolds { folds: cfg.folds, n });
    }
    let c = train.num_classes();
    let kinds = cfg.forest_kinds();
    let mut current = train.clone();
    let mut levels = Vec::new();
    let mut reports = Vec::new();
    let mut scores = Vec::new();

    while levels.len() < cfg.max_levels {
        let level_seed: u64 = rng.gen();
        let folds = kfold_indices(n, cfg.folds, rng::derive_seed(level_seed, u64::MAX))?;
        let trained = par::map_indexed(kinds.len(), |f| {
            train_level_forest(&current, &folds, kinds[f], cfg, rng::derive_seed(level_seed, f as u64))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let correct = (0..n)
            .filter(|&i| {
                let summed = sum_blocks(
                    &trained.iter().flat_map(|t| &t.oof[i * c..(i + 1) * c]).copied().collect::<Vec<_>>(),
                    c,
                );
                argmax(&summed) == train.label(i)
            })
            .count();
        scores.push(correct as f64 / n as f64);

        let in_dim = current.feature_dim();
        let out_dim = in_dim + kinds.len() * c;
        let mut next = Vec::with_capacity(n * out_dim);
        for i in 0..n {
            next.extend_from_slice(current.row(i));
            for t in &trained {
                next.extend_from_slice(&t.oof[i * c..(i + 1) * c]);
            }
        }
        current = current.with_features(next, out_dim);

        let (forests, forest_reports): (Vec<_>, Vec<_>) =
            trained.into_iter().map(|t| (t.forest, t.report)).unzip();
        levels.push(LevelModel::new(forests)?);
        reports.push(LevelReport {
            score: *scores.last().expect("score just pushed"),
            forests: forest_reports,
        });
        if should_stop(&scores, cfg.patience) {
            break;
        }
    }

    let kept = best_level(&scores).expect("at least one level") + 1;
    levels.truncate(kept);
    let model = CascadeModel::new(levels, cfg.mode, train.class_names().to_vec(), cfg.clone())?;
    Ok((
        model,
        TrainReport {
            levels: reports,
            kept_levels: kept,
        },
    ))
}

fn pull(pi: &[f64], w: &[f64]) -> f64 {
    pi.iter().zip(w).map(|(p, v)| p * v * v).sum()
}

/// Fits one forest of a level: out-of-fold distributions, weights, refit.
fn train_level_forest(
    ds: &Dataset,
    folds: &[(Vec<usize>, Vec<usize>)],
    kind: ForestKind,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainedForest> {
    let (n, c, t) = (ds.len(), ds.num_classes(), cfg.trees_per_forest);
    let block = t * c;
    let mut tensor = vec![0.0; n * block];
    for (k, (fit_idx, held_idx)) in folds.iter().enumerate() {
        let mut fold_rng = rng::from_seed(rng::derive_seed(seed, k as u64 + 1));
        let forest = train_forest_on(ds, fit_idx, kind, t, &cfg.tree, &mut fold_rng)?;
        for &i in held_idx {
            forest.tree_dists_into(ds.row(i), &mut tensor[i * block..(i + 1) * block]);
        }
    }

    let uniform = WeightVector::uniform(t);
    let (weights, report) = match cfg.mode {
        Mode::Baseline => (
            uniform,
            ForestReport {
                kind,
                objective_uniform: None,
                objective_trained: None,
                gap: None,
                kept_uniform: true,
                same_uniform: None,
                same_trained: None,
                different_uniform: None,
                different_trained: None,
                pull_uniform: None,
                pull_trained: None,
            },
        ),
        Mode::DisDf => {
            let mut pair_rng = rng::from_seed(rng::derive_seed(seed, folds.len() as u64 + 1));
            let dists = DistTensor {
                values: &tensor,
                trees: t,
                classes: c,
            };
            let stats = compute_pair_stats(dists, ds.labels(), cfg.pair_budget, &mut pair_rng)?;
            let params = ObjectiveParams::new(&stats, cfg.tau, cfg.lambda)?;
            let j_uniform = objective(&params, uniform.as_slice())?;
            let fw = frank_wolfe(&params, cfg.fw_iterations, None)?;
            let kept_uniform = fw.objective > j_uniform;
            let weights = if kept_uniform { uniform.clone() } else { fw.weights };
            let report = ForestReport {
                kind,
                objective_uniform: Some(j_uniform),
                objective_trained: Some(j_uniform.min(fw.objective)),
                gap: Some(fw.gap),
                kept_uniform,
                same_uniform: stats.mean_manhattan(uniform.as_slice(), false),
                same_trained: stats.mean_manhattan(weights.as_slice(), false),
                different_uniform: stats.mean_manhattan(uniform.as_slice(), true),
                different_trained: stats.mean_manhattan(weights.as_slice(), true),
                pull_uniform: Some(pull(stats.pi(), uniform.as_slice())),
                pull_trained: Some(pull(stats.pi(), weights.as_slice())),
            };
            (weights, report)
        }
    };

    let mut oof = vec![0.0; n * c];
    for (i, out) in oof.chunks_exact_mut(c).enumerate() {
        weighted_combine(&tensor[i * block..(i + 1) * block], weights.as_slice(), c, out);
    }

    let mut refit_rng = rng::from_seed(rng::derive_seed(seed, 0));
    let mut forest = train_forest(ds, kind, t, &cfg.tree, &mut refit_rng)?;
    forest.set_weights(weights)?;
    Ok(TrainedForest { forest, oof, report })
}
