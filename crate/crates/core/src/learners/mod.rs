//! The four demand classifiers behind one contract.
//!
//! Every learner maps an encoded row to a probability vector over
//! `{low, moderate, high}`; the predicted class is its argmax with ties
//! resolved toward the lower class index.

pub mod ann;
pub mod boosting;
pub mod forest;
pub mod logistic;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Demand, FeatureMatrix};

pub use ann::{AnnHyper, AnnModel};
pub use boosting::{GbHyper, GbModel};
pub use forest::{Mtry, RfHyper, RfModel};
pub use logistic::{LrHyper, LrModel};
pub use tree::{DecisionTree, TreeHyper};

pub const N_CLASSES: usize = Demand::COUNT;

pub trait Classifier {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES];

    fn predict(&self, row: &[f64]) -> Demand {
        Demand::from_index(argmax(&self.predict_proba(row)))
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (the maximum score is subtracted first).
pub fn softmax(scores: [f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| (s - max).exp());
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lr,
    Ann,
    Rf,
    Gb,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [LearnerKind::Lr, LearnerKind::Ann, LearnerKind::Rf, LearnerKind::Gb];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Lr => "lr",
            LearnerKind::Ann => "ann",
            LearnerKind::Rf => "rf",
            LearnerKind::Gb => "gb",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            LearnerKind::Lr => "Logistic Regression",
            LearnerKind::Ann => "ANN",
            LearnerKind::Rf => "Random Forest",
            LearnerKind::Gb => "Gradient Boosting",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown learner {s:?}")))
    }
}

/// One point of a learner's hyperparameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum Hyper {
    Lr(LrHyper),
    Ann(AnnHyper),
    Rf(RfHyper),
    Gb(GbHyper),
}

impl Hyper {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Hyper::Lr(_) => LearnerKind::Lr,
            Hyper::Ann(_) => LearnerKind::Ann,
            Hyper::Rf(_) => LearnerKind::Rf,
            Hyper::Gb(_) => LearnerKind::Gb,
        }
    }

    pub fn default_for(kind: LearnerKind) -> Hyper {
        match kind {
            LearnerKind::Lr => Hyper::Lr(LrHyper::default()),
            LearnerKind::Ann => Hyper::Ann(AnnHyper::default()),
            LearnerKind::Rf => Hyper::Rf(RfHyper::default()),
            LearnerKind::Gb => Hyper::Gb(GbHyper::default()),
        }
    }

    /// Short identifier of the tuned coordinates, used as a grid cell id.
    pub fn label(&self) -> String {
        match self {
            Hyper::Lr(_) => "default".to_string(),
            Hyper::Ann(h) => format!("hidden={},rate={}", h.hidden, h.learning_rate),
            Hyper::Rf(h) => format!("trees={},mtry={}", h.n_trees, h.mtry),
            Hyper::Gb(h) => format!("trees={}", h.n_trees),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum TrainedModel {
    Lr(LrModel),
    Ann(AnnModel),
    Rf(RfModel),
    Gb(GbModel),
}

impl TrainedModel {
    pub fn kind(&self) -> LearnerKind {
        match self {
            TrainedModel::Lr(_) => LearnerKind::Lr,
            TrainedModel::Ann(_) => LearnerKind::Ann,
            TrainedModel::Rf(_) => LearnerKind::Rf,
            TrainedModel::Gb(_) => LearnerKind::Gb,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Lr(m) => m.n_features,
            TrainedModel::Ann(m) => m.n_inputs,
            TrainedModel::Rf(m) => m.n_features,
            TrainedModel::Gb(m) => m.n_features,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Classifier for TrainedModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        match self {
            TrainedModel::Lr(m) => m.predict_proba(row),
            TrainedModel::Ann(m) => m.predict_proba(row),
            TrainedModel::Rf(m) => m.predict_proba(row),
            TrainedModel::Gb(m) => m.predict_proba(row),
        }
    }

    fn predict(&self, row: &[f64]) -> Demand {
        match self {
            TrainedModel::Rf(m) => m.predict(row),
            other => Demand::from_index(argmax(&other.predict_proba(row))),
        }
    }
}

/// Fit the learner named by `hyper`. `seed` drives every random choice.
pub fn fit(matrix: &FeatureMatrix, hyper: &Hyper, seed: u64) -> Result<TrainedModel> {
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyDataset("cannot fit on an empty matrix".into()));
    }
    Ok(match hyper {
        Hyper::Lr(h) => TrainedModel::Lr(logistic::lr_fit(matrix, h)?),
        Hyper::Ann(h) => TrainedModel::Ann(ann::ann_fit(matrix, h, seed)?),
        Hyper::Rf(h) => TrainedModel::Rf(forest::rf_fit(matrix, h, seed)?),
        Hyper::Gb(h) => TrainedModel::Gb(boosting::gb_fit(matrix, h, seed)?),
    })
}

/// Compressed sparse rows with an implicit leading bias of 1.
///
/// Encoded rows are mostly one-hot zeros, so the gradient learners iterate
/// only the non-zero entries.
pub(crate) struct SparseRows {
    offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SparseRows {
    pub fn from_matrix(matrix: &FeatureMatrix) -> Self {
        let mut offsets = Vec::with_capacity(matrix.n_rows() + 1);
        let mut columns = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for i in 0..matrix.n_rows() {
            for (j, &v) in matrix.row(i).iter().enumerate() {
                if v != 0.0 {
                    columns.push(j);
                    values.push(v);
                }
            }
            offsets.push(columns.len());
        }
        SparseRows {
            offsets,
            columns,
            values,
            labels: (0..matrix.n_rows()).map(|i| matrix.label(i)).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.columns[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax([0.0; 3]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax([2f64.ln(), 0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let p = softmax([1000.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
    }

    #[test]
    fn learner_names_round_trip() {
        for k in LearnerKind::ALL {
            assert_eq!(k.as_str().parse::<LearnerKind>().unwrap(), k);
        }
        assert!("svm".parse::<LearnerKind>().is_err());
    }
}
