//! Discriminative deep forest.
//!
//! A cascade of tree forests in the gcForest style, where each forest's
//! class vector is a weighted combination of its trees' leaf distributions.
//! The tree weights live on the unit simplex and are fitted per forest by
//! minimizing a convex contrastive objective (squared Euclidean pull for
//! same-class pairs, squared-hinge Manhattan push for different-class pairs)
//! with Frank-Wolfe. Freezing the weights at uniform recovers the plain
//! gcForest cascade, which serves as the baseline mode.
//!
//! Module map:
//!
//! - [`data`]: datasets, CSV loading, splits and k-fold partitions.
//! - [`tree`]: random-split-search and completely-random decision trees.
//! - [`forest`]: forests, weight vectors, per-tree and weighted class vectors.
//! - [`pairstats`]: pairwise per-tree statistics feeding the weight objective.
//! - [`weightopt`]: the objective, its gradient, Frank-Wolfe and a reference solver.
//! - [`cascade`]: level-by-level training, augmentation and prediction.
//! - [`eval`]: accuracy, repeated hold-out and experiment grids.
//! - [`config`]: training configuration and its key=value file format.
//! - [`persist`]: versioned binary model files.

pub mod cascade;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod pairstats;
pub mod par;
pub mod persist;
pub mod rng;
pub mod tree;
pub mod weightopt;

pub use cascade::{CascadeModel, LevelModel, Mode};
pub use config::TrainConfig;
pub use data::Dataset;
pub use error::{Error, Result};
pub use forest::{ForestKind, ForestModel, WeightVector};
pub use tree::{TreeKind, TreeModel, TreeParams};
