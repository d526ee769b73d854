//! Labeled tabular datasets.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Dense feature matrix with integer class labels.
///
/// Features are stored row-major. Labels are indices into `class_names`,
/// which always has `num_classes` entries even when a subset lacks a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    feature_dim: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        feature_dim: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature dimension must be at least 1".into()));
        }
        if class_names.len() < 2 {
            return Err(Error::SingleClass);
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not fill {} rows of width {}",
                features.len(),
                labels.len(),
                feature_dim
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / feature_dim,
                column: pos % feature_dim,
            });
        }
        Ok(Self {
            features,
            feature_dim,
            labels,
            class_names,
        })
    }

    /// Builds a dataset with generic class names `"0"`, `"1"`, ...
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let feature_dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != feature_dim) {
            return Err(Error::RaggedRow {
                row: bad,
                expected: feature_dim,
                found: rows[bad].len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let features = rows.iter().flatten().copied().collect();
        let names = (0..num_classes).map(|c| c.to_string()).collect();
        Self::new(features, feature_dim.max(1), labels, names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.feature_dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Keeps the parent's class inventory.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            feature_dim: self.feature_dim,
            labels,
            class_names: self.class_names.clone(),
        }
    }

    /// Same labels, new feature matrix (used for cascade augmentation).
    pub(crate) fn with_features(&self, features: Vec<f64>, feature_dim: usize) -> Dataset {
        debug_assert_eq!(features.len(), self.len() * feature_dim);
        Dataset {
            features,
            feature_dim,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl LabelColumn {
    /// `"last"` selects the final column, a number selects by 0-based
    /// index, anything else is a header name.
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("last") {
            LabelColumn::Last
        } else if let Ok(i) = s.parse() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_string())
        }
    }
}

struct RawTable {
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::InvalidDataset(format!("{other:?}")),
        })?;
        // a whitespace-only line parses as one empty field
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    Ok(RawTable { rows })
}

fn is_numeric(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
        row,
        column,
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite { row, column });
    }
    Ok(v)
}

/// Loads a comma-separated file with one label column.
///
/// A header row is assumed iff the first row has a non-numeric cell outside
/// the label column. Labels are re-encoded to `0..C` in order of first
/// appearance. Error row numbers are 1-based file line numbers.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let mut table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = table.rows[0].1.len();

    // Resolve the label column against the first row before deciding on a header.
    let first = &table.rows[0].1;
    let label_idx = match label_column {
        LabelColumn::Index(i) => *i,
        LabelColumn::Last => width - 1,
        LabelColumn::Name(name) => first
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownLabelColumn(name.clone()))?,
    };
    if label_idx >= width {
        return Err(Error::UnknownLabelColumn(label_idx.to_string()));
    }
    let has_header = matches!(label_column, LabelColumn::Name(_))
        || first
            .iter()
            .enumerate()
            .any(|(j, c)| j != label_idx && !is_numeric(c));
    if has_header {
        table.rows.remove(0);
    }
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let feature_dim = width - 1;
    if feature_dim == 0 {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }
    let mut features = Vec::with_capacity(table.rows.len() * feature_dim);
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut class_names: Vec<String> = Vec::new();
    for (lineno, cells) in &table.rows {
        if cells.len() != width {
            return Err(Error::RaggedRow {
                row: *lineno,
                expected: width,
                found: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            if j != label_idx {
                features.push(parse_cell(cell, *lineno, j)?);
            }
        }
        let name = &cells[label_idx];
        let label = match class_names.iter().position(|c| c == name) {
            Some(l) => l,
            None => {
                class_names.push(name.clone());
                class_names.len() - 1
            }
        };
        labels.push(label);
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass);
    }
    Dataset::new(features, feature_dim, labels, class_names)
}

/// Loads an unlabeled feature matrix, optionally dropping one column.
///
/// Returns the row-major values and the row width. An empty file yields no
/// rows.
pub fn load_feature_csv(
    path: impl AsRef<Path>,
    drop_column: Option<&LabelColumn>,
) -> Result<(Vec<f64>, usize)> {
    let path = path.as_ref();
    let mut table = read_table(path)?;
    if table.rows.is_empty() {
        return Ok((Vec::new(), 0));
    }
    let width = table.rows[0].1.len();
    let first = &table.rows[0].1;
    let drop_idx = match drop_column {
        None => None,
        Some(LabelColumn::Index(i)) => Some(*i),
        Some(LabelColumn::Last) => Some(width - 1),
        Some(LabelColumn::Name(name)) => Some(
            first
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::UnknownLabelColumn(name.clone()))?,
        ),
    };
    let has_header = first
        .iter()
        .enumerate()
        .any(|(j, c)| Some(j) != drop_idx && !is_numeric(c));
    if has_header {
        table.rows.remove(0);
    }
    let out_width = width - usize::from(drop_idx.is_some_and(|d| d < width));
    let mut values = Vec::with_capacity(table.rows.len() * out_width);
    for (lineno, cells) in &table.rows {
        if cells.len() != width {
            return Err(Error::RaggedRow {
                row: *lineno,
                expected: width,
                found: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            if Some(j) != drop_idx {
                values.push(parse_cell(cell, *lineno, j)?);
            }
        }
    }
    Ok((values, out_width))
}

/// Disjoint uniformly random train/test subsets.
pub fn split(ds: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), n_train, n_test, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(
    n: usize,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let requested = n_train + n_test;
    if requested > n {
        return Err(Error::SplitTooLarge {
            requested,
            available: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::from_seed(seed));
    let test = idx[n_train..requested].to_vec();
    idx.truncate(n_train);
    Ok((idx, test))
}

/// Like [`split`], but each class is represented in proportion to its
/// frequency (largest-remainder rounding).
pub fn split_stratified(
    ds: &Dataset,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    let requested = n_train + n_test;
    if requested > n {
        return Err(Error::SplitTooLarge {
            requested,
            available: n,
        });
    }
    let mut rng = rng::from_seed(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let train_quota = proportional_quota(&counts, n_train, &vec![0; counts.len()]);
    let test_quota = proportional_quota(&counts, n_test, &train_quota);

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n_test);
    for (c, members) in by_class.iter().enumerate() {
        train.extend_from_slice(&members[..train_quota[c]]);
        test.extend_from_slice(&members[train_quota[c]..train_quota[c] + test_quota[c]]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((ds.subset(&train), ds.subset(&test)))
}

fn proportional_quota(counts: &[usize], total: usize, taken: &[usize]) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let mut quota: Vec<usize> = counts.iter().map(|&c| c * total / n).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse((counts[c] * total) % n));
    let mut missing = total - quota.iter().sum::<usize>();
    // Hand out the remainder; a class can never exceed its remaining members.
    while missing > 0 {
        let mut progressed = false;
        for &c in &order {
            if missing == 0 {
                break;
            }
            if quota[c] + taken[c] < counts[c] {
                quota[c] += 1;
                missing -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    for c in 0..counts.len() {
        quota[c] = quota[c].min(counts[c] - taken[c]);
    }
    quota
}

/// Shuffled k-fold partition of `0..n` as `(train, holdout)` index pairs.
///
/// Holdout sizes differ by at most one; the first `n % folds` folds get the
/// extra element.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidFolds { folds, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::from_seed(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let holdout = idx[start..start + size].to_vec();
        let train = idx[..start].iter().chain(&idx[start + size..]).copied().collect();
        out.push((train, holdout));
        start += size;
    }
    Ok(out)
}
