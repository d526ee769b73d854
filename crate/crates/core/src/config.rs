//! Training configuration and its flat `key = value` text form.
//!
//! The same text form is used for config files and for the config echo
//! stored in model files. Blank lines and lines starting with `#` are
//! ignored. Unknown keys are an error.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forest::ForestKind;
use crate::tree::TreeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Tree weights fitted by the discriminative objective.
    DisDf,
    /// Uniform tree weights (plain gcForest cascade).
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::DisDf => "disdf",
            Mode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "disdf" => Ok(Mode::DisDf),
            "baseline" | "gcforest" | "gcf" => Ok(Mode::Baseline),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub random_forests: usize,
    pub completely_random_forests: usize,
    pub trees_per_forest: usize,
    pub max_levels: usize,
    pub patience: usize,
    pub folds: usize,
    pub tau: f64,
    pub lambda: f64,
    pub fw_iterations: usize,
    /// `None` uses every pair.
    pub pair_budget: Option<usize>,
    pub seed: u64,
    pub mode: Mode,
    pub tree: TreeParams,
    pub stratified_split: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            random_forests: 2,
            completely_random_forests: 2,
            trees_per_forest: 100,
            max_levels: 10,
            patience: 1,
            folds: 3,
            tau: 0.5,
            lambda: 0.01,
            fw_iterations: 2000,
            pair_budget: None,
            seed: 0,
            mode: Mode::DisDf,
            tree: TreeParams::default(),
            stratified_split: false,
        }
    }
}

const KEYS: &[&str] = &[
    "random_forests",
    "completely_random_forests",
    "trees",
    "max_levels",
    "patience",
    "folds",
    "tau",
    "lambda",
    "fw_iterations",
    "pair_budget",
    "seed",
    "mode",
    "min_leaf",
    "max_depth",
    "stratified_split",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "none" | "unlimited" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl TrainConfig {
    /// Forest kinds of one level, random forests first.
    pub fn forest_kinds(&self) -> Vec<ForestKind> {
        std::iter::repeat_n(ForestKind::Random, self.random_forests)
            .chain(std::iter::repeat_n(ForestKind::CompletelyRandom, self.completely_random_forests))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.random_forests + self.completely_random_forests == 0 {
            return fail("a level needs at least one forest");
        }
        if self.trees_per_forest == 0 {
            return fail("trees must be at least 1");
        }
        if self.max_levels == 0 {
            return fail("max_levels must be at least 1");
        }
        if self.patience == 0 {
            return fail("patience must be at least 1");
        }
        if self.folds < 2 {
            return fail("folds must be at least 2");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return fail("tau must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail("lambda must be non-negative");
        }
        if self.fw_iterations == 0 {
            return fail("fw_iterations must be at least 1");
        }
        if self.pair_budget == Some(0) {
            return fail("pair_budget must be positive");
        }
        if self.tree.min_leaf == 0 {
            return fail("min_leaf must be at least 1");
        }
        if self.tree.max_depth == Some(0) {
            return fail("max_depth must be at least 1");
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "random_forests" => self.random_forests = parse(key, value)?,
            "completely_random_forests" => self.completely_random_forests = parse(key, value)?,
            "trees" | "trees_per_forest" => self.trees_per_forest = parse(key, value)?,
            "max_levels" => self.max_levels = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "fw_iterations" => self.fw_iterations = parse(key, value)?,
            "pair_budget" => self.pair_budget = parse_optional(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "min_leaf" => self.tree.min_leaf = parse(key, value)?,
            "max_depth" => self.tree.max_depth = parse_optional(key, value)?,
            "stratified_split" => self.stratified_split = parse(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown key {other:?} (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            // values never contain '#'
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Canonical text form; floats are written with round-trip precision.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |x| x.to_string());
        format!(
            "random_forests = {}\ncompletely_random_forests = {}\ntrees = {}\nmax_levels = {}\n\
             patience = {}\nfolds = {}\ntau = {:?}\nlambda = {:?}\nfw_iterations = {}\n\
             pair_budget = {}\nseed = {}\nmode = {}\nmin_leaf = {}\nmax_depth = {}\n\
             stratified_split = {}\n",
            self.random_forests,
            self.completely_random_forests,
            self.trees_per_forest,
            self.max_levels,
            self.patience,
            self.folds,
            self.tau,
            self.lambda,
            self.fw_iterations,
            opt(self.pair_budget),
            self.seed,
            self.mode,
            self.tree.min_leaf,
            opt(self.tree.max_depth),
            self.stratified_split,
        )
    }
}
