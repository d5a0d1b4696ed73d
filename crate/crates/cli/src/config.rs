//! Declarative run configuration, read from TOML.
//!
//! Every field has a default, so an empty file (or no file at all) describes
//! the full protocol: K in {5, 10, 15, 20}, listwise deletion, a 70/30
//! split, 10-fold cross-validation and the built-in grids of every learner.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skyport_core::eval::{
    ann_grid, ann_hidden_sizes, default_tree_counts, gb_grid, rf_grid, CvOptions,
    DEFAULT_ANN_RATES,
};
use skyport_core::features::Imputation;
use skyport_core::importance::DEFAULT_REPEATS;
use skyport_core::ingest::SyntheticSpec;
use skyport_core::learners::{AnnHyper, GbHyper, Hyper, LearnerKind, LrHyper, Mtry, RfHyper};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Root of every artifact the pipeline writes.
    pub output: PathBuf,
    pub data: DataPaths,
    pub k_values: Vec<usize>,
    pub imputation: Imputation,
    pub split_ratio: f64,
    pub learners: Vec<LearnerKind>,
    pub cv: CvConfig,
    pub grids: Grids,
    pub importance: ImportanceConfig,
    /// Used by `generate` only.
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            output: PathBuf::from("skyport-out"),
            data: DataPaths::default(),
            k_values: vec![5, 10, 15, 20],
            imputation: Imputation::Listwise,
            split_ratio: 0.7,
            learners: LearnerKind::ALL.to_vec(),
            cv: CvConfig::default(),
            grids: Grids::default(),
            importance: ImportanceConfig::default(),
            synthetic: SyntheticSpec::default(),
        }
    }
}

/// Input files; unset paths default to `<output>/data/trips.csv` and
/// `<output>/data/weather.csv`, which is where `generate` writes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub trips: Option<PathBuf>,
    pub weather: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub stratified: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub lr: LrHyper,
    pub ann: AnnGrid,
    pub rf: RfGrid,
    pub gb: GbGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnGrid {
    /// Explicit hidden sizes; empty means 1, 1 + step, ... up to the number
    /// of encoded inputs.
    pub hidden: Vec<usize>,
    pub hidden_step: usize,
    pub rates: Vec<f64>,
    pub epochs: usize,
}

impl Default for AnnGrid {
    fn default() -> Self {
        AnnGrid {
            hidden: Vec::new(),
            hidden_step: 5,
            rates: DEFAULT_ANN_RATES.to_vec(),
            epochs: AnnHyper::default().epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfGrid {
    pub trees: Vec<usize>,
    pub mtry: Vec<Mtry>,
    pub bootstrap: bool,
}

impl Default for RfGrid {
    fn default() -> Self {
        RfGrid {
            trees: default_tree_counts(),
            mtry: Mtry::GRID.to_vec(),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbGrid {
    pub trees: Vec<usize>,
    pub shrinkage: f64,
    pub subsample: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbGrid {
    fn default() -> Self {
        let base = GbHyper::default();
        GbGrid {
            trees: default_tree_counts(),
            shrinkage: base.shrinkage,
            subsample: base.subsample,
            max_depth: base.max_depth,
            min_leaf: base.min_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    /// Learners to explain; empty means the best learner of each K by test
    /// macro-F1.
    pub learners: Vec<LearnerKind>,
    pub repeats: usize,
    pub top: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            learners: Vec::new(),
            repeats: DEFAULT_REPEATS,
            top: 5,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn trips_path(&self) -> PathBuf {
        self.data
            .trips
            .clone()
            .unwrap_or_else(|| self.output.join("data").join("trips.csv"))
    }

    pub fn weather_path(&self) -> PathBuf {
        self.data
            .weather
            .clone()
            .unwrap_or_else(|| self.output.join("data").join("weather.csv"))
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            folds: self.cv.folds,
            stratified: self.cv.stratified,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.k_values.is_empty() {
            return bad("k_values must not be empty".into());
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k == 0) {
            return bad(format!("K values must be at least 1, got {k}"));
        }
        let mut ks = self.k_values.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks.len() != self.k_values.len() {
            return bad("k_values contains duplicates".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} must lie in (0, 1)", self.split_ratio));
        }
        if self.cv.folds < 2 {
            return bad("cv.folds must be at least 2".into());
        }
        if self.learners.is_empty() {
            return bad("learners must not be empty".into());
        }
        let mut learners = self.learners.clone();
        learners.sort_unstable();
        learners.dedup();
        if learners.len() != self.learners.len() {
            return bad("learners contains duplicates".into());
        }
        let g = &self.grids;
        if g.rf.trees.is_empty() || g.rf.mtry.is_empty() {
            return bad("grids.rf needs at least one tree count and one mtry rule".into());
        }
        if g.gb.trees.is_empty() {
            return bad("grids.gb needs at least one tree count".into());
        }
        if g.ann.rates.is_empty() || g.ann.hidden.contains(&0) || g.ann.hidden_step == 0 {
            return bad("grids.ann needs rates, positive hidden sizes and a positive step".into());
        }
        if self.importance.repeats == 0 || self.importance.top == 0 {
            return bad("importance.repeats and importance.top must be positive".into());
        }
        Ok(())
    }

    /// Search space of `kind` for `n_features` encoded inputs; empty for
    /// logistic regression, which has nothing to tune.
    pub fn grid(&self, kind: LearnerKind, n_features: usize) -> Vec<Hyper> {
        let g = &self.grids;
        match kind {
            LearnerKind::Lr => Vec::new(),
            LearnerKind::Rf => rf_grid(
                &RfHyper {
                    bootstrap: g.rf.bootstrap,
                    ..RfHyper::default()
                },
                &g.rf.trees,
                &g.rf.mtry,
            ),
            LearnerKind::Gb => gb_grid(
                &GbHyper {
                    shrinkage: g.gb.shrinkage,
                    subsample: g.gb.subsample,
                    max_depth: g.gb.max_depth,
                    min_leaf: g.gb.min_leaf,
                    ..GbHyper::default()
                },
                &g.gb.trees,
            ),
            LearnerKind::Ann => {
                let hidden = if g.ann.hidden.is_empty() {
                    ann_hidden_sizes(n_features, g.ann.hidden_step)
                } else {
                    g.ann.hidden.clone()
                };
                ann_grid(
                    &AnnHyper {
                        epochs: g.ann.epochs,
                        ..AnnHyper::default()
                    },
                    &hidden,
                    &g.ann.rates,
                )
            }
        }
    }

    /// The configuration fitted directly when there is no grid.
    pub fn untuned(&self, kind: LearnerKind) -> Hyper {
        match kind {
            LearnerKind::Lr => Hyper::Lr(self.grids.lr.clone()),
            other => Hyper::default_for(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_the_full_protocol() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.k_values, vec![5, 10, 15, 20]);
        assert_eq!(c.grid(LearnerKind::Rf, 60).len(), 40);
        assert_eq!(c.grid(LearnerKind::Gb, 60).len(), 10);
        assert_eq!(c.grid(LearnerKind::Ann, 60).len(), 12 * 3);
        assert!(c.grid(LearnerKind::Lr, 60).is_empty());
        c.validate().unwrap();
    }

    #[test]
    fn partial_overrides() {
        let c = RunConfig::from_toml(
            r#"
            seed = 7
            k_values = [5]
            learners = ["gb", "lr"]
            [grids.rf]
            trees = [100, 300]
            mtry = ["sqrt", { count = 4 }]
            [grids.ann]
            hidden = [6]
            rates = [0.1]
            [synthetic]
            trips = 1000
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.learners, vec![LearnerKind::Gb, LearnerKind::Lr]);
        assert_eq!(c.grid(LearnerKind::Rf, 60).len(), 4);
        assert_eq!(c.grid(LearnerKind::Ann, 60).len(), 1);
        assert_eq!(c.synthetic.trips, 1000);
        assert_eq!(c.synthetic.hotspots.len(), 5);
        assert_eq!(c.cv.folds, 10);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(RunConfig::from_toml("nonsense = 1").is_err());
        assert!(RunConfig::from_toml("learners = [\"svm\"]").is_err());
        for text in [
            "k_values = []",
            "k_values = [0]",
            "k_values = [5, 5]",
            "split_ratio = 1.0",
            "[cv]\nfolds = 1",
            "learners = []",
            "[grids.gb]\ntrees = []",
            "[importance]\nrepeats = 0",
        ] {
            let c = RunConfig::from_toml(text).unwrap();
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn default_data_paths_live_under_output() {
        let c = RunConfig::default();
        assert_eq!(c.trips_path(), c.output.join("data/trips.csv"));
        assert_eq!(c.weather_path(), c.output.join("data/weather.csv"));
    }
}
