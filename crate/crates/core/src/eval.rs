//! Accuracy, repeated random hold-out and DisDF-vs-baseline grids.
//!
//! Each repetition draws `N` training rows and `ceil(2N/3)` disjoint test
//! rows. Both modes see identical splits and identical forest random
//! streams, so the per-repetition difference isolates the effect of the
//! fitted tree weights.

use std::fmt::Write as _;

use crate::cascade::{train_cascade, CascadeModel, Mode};
use crate::config::TrainConfig;
use crate::data::{split, split_stratified, Dataset};
use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Fraction of rows of `test` whose predicted class equals the label.
pub fn accuracy(model: &CascadeModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predicted = model.predict_dataset(test)?;
    let correct = predicted.iter().zip(test.labels()).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / test.len() as f64)
}

/// Test-set size paired with `n_train` training rows: `ceil(2N/3)`.
pub fn test_size(n_train: usize) -> usize {
    (2 * n_train).div_ceil(3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub mean: f64,
    /// Sample standard deviation; zero for a single repetition.
    pub std: f64,
    /// Accuracies in repetition order.
    pub accuracies: Vec<f64>,
}

impl ModeSummary {
    fn from_accuracies(mode: Mode, accuracies: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&accuracies);
        Self {
            mode,
            mean,
            std,
            accuracies,
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub trees: usize,
    pub baseline: ModeSummary,
    pub disdf: ModeSummary,
}

impl HoldoutSummary {
    /// Mean over repetitions of `disdf - baseline`.
    pub fn mean_paired_difference(&self) -> f64 {
        let diffs: Vec<f64> = self
            .disdf
            .accuracies
            .iter()
            .zip(&self.baseline.accuracies)
            .map(|(d, b)| d - b)
            .collect();
        mean_std(&diffs).0
    }

    pub fn mode(&self, mode: Mode) -> &ModeSummary {
        match mode {
            Mode::Baseline => &self.baseline,
            Mode::DisDf => &self.disdf,
        }
    }
}

/// One repetition's hold-out split; `cfg.stratified_split` selects the
/// stratified variant.
pub fn holdout_split(ds: &Dataset, n_train: usize, cfg: &TrainConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let n_test = test_size(n_train);
    if cfg.stratified_split {
        split_stratified(ds, n_train, n_test, seed)
    } else {
        split(ds, n_train, n_test, seed)
    }
}

/// Runs `reps` paired repetitions of both modes. Repetition `r` uses the
/// stream `derive_seed(seed, r)` for its split and forests.
pub fn repeated_holdout(
    ds: &Dataset,
    n_train: usize,
    reps: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<HoldoutSummary> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    cfg.validate()?;
    let n_test = test_size(n_train);
    if n_train + n_test > ds.len() {
        return Err(Error::SplitTooLarge {
            requested: n_train + n_test,
            available: ds.len(),
        });
    }
    let per_rep = par::map_indexed(reps, |r| -> Result<(f64, f64)> {
        let rep_seed = rng::derive_seed(seed, r as u64);
        let (train, test) = holdout_split(ds, n_train, cfg, rng::derive_seed(rep_seed, 0))?;
        let forest_seed = rng::derive_seed(rep_seed, 1);
        let run = |mode: Mode| -> Result<f64> {
            let mode_cfg = TrainConfig { mode, ..cfg.clone() };
            let model = train_cascade(&train, &mode_cfg, &mut rng::from_seed(forest_seed))?;
            accuracy(&model, &test)
        };
        Ok((run(Mode::Baseline)?, run(Mode::DisDf)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (baseline, disdf): (Vec<f64>, Vec<f64>) = per_rep.into_iter().unzip();
    Ok(HoldoutSummary {
        n_train,
        n_test,
        trees: cfg.trees_per_forest,
        baseline: ModeSummary::from_accuracies(Mode::Baseline, baseline),
        disdf: ModeSummary::from_accuracies(Mode::DisDf, disdf),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub ns: Vec<usize>,
    pub ts: Vec<usize>,
    pub reps: usize,
    pub base: TrainConfig,
    pub seed: u64,
}

impl ExperimentGrid {
    /// Checks the grid against a dataset of `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.ns.is_empty() || self.ts.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one N and one T".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if let Some(&t) = self.ts.iter().find(|&&t| t == 0) {
            return Err(Error::InvalidConfig(format!("T = {t} trees is not allowed")));
        }
        for &n_train in &self.ns {
            if n_train < self.base.folds {
                return Err(Error::InvalidFolds {
                    folds: self.base.folds,
                    n: n_train,
                });
            }
            let needed = n_train + test_size(n_train);
            if needed > n {
                return Err(Error::SplitTooLarge {
                    requested: needed,
                    available: n,
                });
            }
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub n_train: usize,
    pub trees: usize,
    pub summary: HoldoutSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub dataset: String,
    /// Row-major over `ns`, then `ts`.
    pub cells: Vec<GridCell>,
    pub ns: Vec<usize>,
    pub ts: Vec<usize>,
}

pub fn run_grid(ds: &Dataset, dataset_name: &str, grid: &ExperimentGrid) -> Result<GridResult> {
    grid.validate(ds.len())?;
    let mut cells = Vec::with_capacity(grid.ns.len() * grid.ts.len());
    for &n_train in &grid.ns {
        for &trees in &grid.ts {
            let cfg = TrainConfig {
                trees_per_forest: trees,
                ..grid.base.clone()
            };
            let summary = repeated_holdout(ds, n_train, grid.reps, &cfg, grid.seed)?;
            cells.push(GridCell {
                n_train,
                trees,
                summary,
            });
        }
    }
    Ok(GridResult {
        dataset: dataset_name.to_string(),
        cells,
        ns: grid.ns.clone(),
        ts: grid.ts.clone(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const MODES: [Mode; 2] = [Mode::Baseline, Mode::DisDf];

impl GridResult {
    pub fn cell(&self, n_train: usize, trees: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.n_train == n_train && c.trees == trees)
    }

    /// `dataset,N,T,mode,rep,accuracy`, one line per repetition and mode.
    pub fn reps_csv(&self) -> String {
        let name = csv_field(&self.dataset);
        let mut out = String::from("dataset,N,T,mode,rep,accuracy\n");
        for cell in &self.cells {
            for mode in MODES {
                for (r, acc) in cell.summary.mode(mode).accuracies.iter().enumerate() {
                    let _ = writeln!(out, "{name},{},{},{mode},{r},{acc:?}", cell.n_train, cell.trees);
                }
            }
        }
        out
    }

    /// `dataset,N,T,mode,reps,mean,std`, one line per cell and mode.
    pub fn summary_csv(&self) -> String {
        let name = csv_field(&self.dataset);
        let mut out = String::from("dataset,N,T,mode,reps,mean,std\n");
        for cell in &self.cells {
            for mode in MODES {
                let s = cell.summary.mode(mode);
                let _ = writeln!(
                    out,
                    "{name},{},{},{mode},{},{:?},{:?}",
                    cell.n_train,
                    cell.trees,
                    s.accuracies.len(),
                    s.mean,
                    s.std
                );
            }
        }
        out
    }

    /// Aligned text table: one row per N, a (gcF, DisDF) column pair per T.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>6}", "");
        for t in &self.ts {
            let _ = write!(out, "  {:^15}", format!("T={t}"));
        }
        out.push('\n');
        let _ = write!(out, "{:>6}", "N");
        for _ in &self.ts {
            let _ = write!(out, "  {:>7} {:>7}", "gcF", "DisDF");
        }
        out.push('\n');
        for &n in &self.ns {
            let _ = write!(out, "{n:>6}");
            for &t in &self.ts {
                match self.cell(n, t) {
                    Some(c) => {
                        let _ = write!(out, "  {:>7.3} {:>7.3}", c.summary.baseline.mean, c.summary.disdf.mean);
                    }
                    None => {
                        let _ = write!(out, "  {:>7} {:>7}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
