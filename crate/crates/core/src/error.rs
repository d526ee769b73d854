use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}, column {column}: value is not finite")]
    NonFinite { row: usize, column: usize },

    #[error("label column {0} not found")]
    UnknownLabelColumn(String),

    #[error("dataset has a single class; at least two are required")]
    SingleClass,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("cannot draw {requested} samples from a dataset of {available}")]
    SplitTooLarge { requested: usize, available: usize },

    #[error("invalid fold count {folds} for {n} samples")]
    InvalidFolds { folds: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("weight vector is off the unit simplex (sum {sum}, min {min})")]
    OffSimplex { sum: f64, min: f64 },

    #[error("degenerate pair set: every retained pair is {0}")]
    DegeneratePairSet(&'static str),

    #[error("gradient contains NaN")]
    NanGradient,

    #[error("reference solver did not converge after {iterations} iterations (gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("not a model file (bad magic)")]
    BadMagic,

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("model checksum mismatch; file is corrupted")]
    ChecksumMismatch,

    #[error("model file is truncated or malformed: {0}")]
    Malformed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
