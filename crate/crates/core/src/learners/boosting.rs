//! Multinomial gradient boosting with shallow regression trees.
//!
//! Scores start at the log class frequencies. Each stage draws a subsample
//! without replacement, fits one least-squares regression tree per class to
//! the residuals `y_c - p_c`, sets each leaf to the one-step Newton value
//! `(K-1)/K * sum(r) / sum(|r| (1 - |r|))`, and adds the shrunken tree to
//! that class's score. Probabilities are the softmax of the scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::TreeData;
use super::{softmax, Classifier, N_CLASSES};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::{derive_indexed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbHyper {
    pub n_trees: usize,
    pub shrinkage: f64,
    /// Fraction of rows drawn (without replacement) for each stage.
    pub subsample: f64,
    pub max_depth: usize,
    /// Minimum rows in each child of a split.
    pub min_leaf: usize,
}

impl Default for GbHyper {
    fn default() -> Self {
        GbHyper {
            n_trees: 100,
            shrinkage: 0.1,
            subsample: 0.5,
            max_depth: 3,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { *left } else { *right },
                RegressionNode::Leaf { value } => return *value,
            }
        }
    }

    fn predict_data(&self, data: &TreeData, row: usize) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if data.value(row, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                RegressionNode::Leaf { value } => return *value,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbModel {
    pub n_features: usize,
    /// Initial per-class scores (log class frequencies).
    pub init: [f64; N_CLASSES],
    pub shrinkage: f64,
    pub subsample: f64,
    /// One tree per class per stage.
    pub stages: Vec<Vec<RegressionTree>>,
    /// Mean training negative log-likelihood before the first stage and
    /// after each one.
    pub deviance_trace: Vec<f64>,
}

impl GbModel {
    pub fn scores_staged(&self, row: &[f64], n_stages: usize) -> [f64; N_CLASSES] {
        let mut scores = self.init;
        for stage in self.stages.iter().take(n_stages) {
            for (s, tree) in scores.iter_mut().zip(stage) {
                *s += self.shrinkage * tree.predict(row);
            }
        }
        scores
    }

    /// Probabilities using only the first `n_stages` stages.
    pub fn predict_proba_staged(&self, row: &[f64], n_stages: usize) -> [f64; N_CLASSES] {
        softmax(self.scores_staged(row, n_stages))
    }
}

impl Classifier for GbModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        self.predict_proba_staged(row, self.stages.len())
    }
}

/// Floor applied to class frequencies before taking logs.
const MIN_PRIOR: f64 = 1e-12;

#[derive(Clone, Copy)]
struct RegSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Least-squares split: maximize `S_L^2/n_L + S_R^2/n_R - S^2/n`.
fn best_regression_split(
    data: &TreeData,
    rows: &[usize],
    target: &[f64],
    min_leaf: usize,
    sorted: &mut Vec<(f64, usize)>,
) -> Option<RegSplit> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| target[r]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<RegSplit> = None;
    let mut consider = |feature: usize, threshold: f64, n_left: usize, sum_left: f64| {
        let n_right = n - n_left;
        if n_left < min_leaf.max(1) || n_right < min_leaf.max(1) {
            return;
        }
        let sum_right = total - sum_left;
        let gain = sum_left * sum_left / n_left as f64 + sum_right * sum_right / n_right as f64 - parent;
        if best.is_none_or(|b| gain > b.gain + 1e-12) {
            best = Some(RegSplit {
                feature,
                threshold,
                gain,
            });
        }
    };
    for f in 0..data.n_cols() {
        let column = data.column(f);
        if data.is_binary(f) {
            let (mut n_zero, mut sum_zero) = (0usize, 0.0);
            for &r in rows {
                if column[r] == 0.0 {
                    n_zero += 1;
                    sum_zero += target[r];
                }
            }
            if n_zero > 0 && n_zero < n {
                consider(f, 0.5, n_zero, sum_zero);
            }
            continue;
        }
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (column[r], r)));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut sum_left = 0.0;
        for (i, pair) in sorted.windows(2).enumerate() {
            sum_left += target[pair[0].1];
            if pair[1].0 > pair[0].0 {
                consider(f, 0.5 * (pair[0].0 + pair[1].0), i + 1, sum_left);
            }
        }
    }
    best.filter(|b| b.gain > 1e-12)
}

fn newton_leaf(rows: &[usize], residual: &[f64]) -> f64 {
    let num: f64 = rows.iter().map(|&r| residual[r]).sum();
    let den: f64 = rows
        .iter()
        .map(|&r| {
            let a = residual[r].abs();
            a * (1.0 - a)
        })
        .sum();
    if den.abs() < 1e-150 {
        return 0.0;
    }
    (N_CLASSES as f64 - 1.0) / N_CLASSES as f64 * num / den
}

fn fit_regression_tree(
    data: &TreeData,
    rows: Vec<usize>,
    residual: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let mut nodes = vec![RegressionNode::Leaf {
        value: newton_leaf(&rows, residual),
    }];
    let mut stack = vec![(0usize, rows, 0usize)];
    let mut scratch = Vec::new();
    while let Some((index, rows, depth)) = stack.pop() {
        if depth >= max_depth || rows.len() < 2 * min_leaf.max(1) {
            continue;
        }
        let Some(split) = best_regression_split(data, &rows, residual, min_leaf, &mut scratch) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&row| data.value(row, split.feature) <= split.threshold);
        let left = nodes.len();
        nodes.push(RegressionNode::Leaf {
            value: newton_leaf(&l, residual),
        });
        nodes.push(RegressionNode::Leaf {
            value: newton_leaf(&r, residual),
        });
        nodes[index] = RegressionNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right: left + 1,
        };
        stack.push((left + 1, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    RegressionTree { nodes }
}

fn mean_nll(probs: &[[f64; N_CLASSES]], labels: &[usize]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len() as f64
}

pub fn gb_fit(matrix: &FeatureMatrix, hyper: &GbHyper, seed: u64) -> Result<GbModel> {
    if !(hyper.shrinkage > 0.0 && hyper.shrinkage.is_finite()) {
        return Err(Error::argument("shrinkage must be positive"));
    }
    if !(hyper.subsample > 0.0 && hyper.subsample <= 1.0) {
        return Err(Error::argument("subsample fraction must lie in (0, 1]"));
    }
    let data = TreeData::from_matrix(matrix);
    let m = data.n_rows();
    if m == 0 {
        return Err(Error::EmptyDataset("cannot boost on an empty matrix".into()));
    }
    let labels: Vec<usize> = (0..m).map(|i| data.label(i)).collect();
    let counts = matrix.class_counts();
    let init: [f64; N_CLASSES] =
        std::array::from_fn(|c| (counts[c] as f64 / m as f64).max(MIN_PRIOR).ln());

    let mut scores = vec![init; m];
    let mut probs: Vec<[f64; N_CLASSES]> = scores.iter().map(|s| softmax(*s)).collect();
    let mut trace = vec![mean_nll(&probs, &labels)];
    let mut stages = Vec::with_capacity(hyper.n_trees);
    let draw = ((hyper.subsample * m as f64).round() as usize).clamp(1, m);

    for stage in 0..hyper.n_trees {
        let rows: Vec<usize> = if draw == m {
            (0..m).collect()
        } else {
            let mut rng = rng_from(derive_indexed(seed, "stage", stage));
            let mut picked = rand::seq::index::sample(&mut rng, m, draw).into_vec();
            picked.sort_unstable();
            picked
        };
        let trees: Vec<RegressionTree> = (0..N_CLASSES)
            .into_par_iter()
            .map(|c| {
                let residual: Vec<f64> = probs
                    .iter()
                    .zip(&labels)
                    .map(|(p, &y)| f64::from(u8::from(y == c)) - p[c])
                    .collect();
                fit_regression_tree(&data, rows.clone(), &residual, hyper.max_depth, hyper.min_leaf)
            })
            .collect();
        for (i, s) in scores.iter_mut().enumerate() {
            for (c, tree) in trees.iter().enumerate() {
                s[c] += hyper.shrinkage * tree.predict_data(&data, i);
            }
        }
        probs = scores.iter().map(|s| softmax(*s)).collect();
        let deviance = mean_nll(&probs, &labels);
        if !deviance.is_finite() {
            return Err(Error::Training {
                iteration: stage + 1,
                reason: "non-finite deviance".into(),
            });
        }
        trace.push(deviance);
        stages.push(trees);
    }

    Ok(GbModel {
        n_features: data.n_cols(),
        init,
        shrinkage: hyper.shrinkage,
        subsample: hyper.subsample,
        stages,
        deviance_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Demand;

    fn toy(n: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i % 10) as f64, ((i * 7) % 13) as f64, (i % 2) as f64])
            .collect();
        let labels = (0..n)
            .map(|i| {
                let x = (i % 10) as f64 + 0.3 * ((i * 7) % 13) as f64;
                Demand::from_index(if x < 4.0 { 0 } else if x < 8.0 { 1 } else { 2 })
            })
            .collect();
        FeatureMatrix::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn zero_stages_is_the_prior() {
        let m = toy(60);
        let hyper = GbHyper {
            n_trees: 0,
            ..GbHyper::default()
        };
        let model = gb_fit(&m, &hyper, 1).unwrap();
        let counts = m.class_counts();
        for i in 0..m.n_rows() {
            let p = model.predict_proba(m.row(i));
            for c in 0..3 {
                assert!((p[c] - counts[c] as f64 / 60.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balanced_prior_is_uniform() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = (0..6).map(|i| Demand::from_index(i % 3)).collect();
        let m = FeatureMatrix::from_rows(&rows, labels).unwrap();
        let model = gb_fit(&m, &GbHyper { n_trees: 0, ..GbHyper::default() }, 0).unwrap();
        for v in model.predict_proba(&[2.0]) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn staged_evaluation_matches_full_model() {
        let m = toy(80);
        let model = gb_fit(&m, &GbHyper { n_trees: 20, ..GbHyper::default() }, 4).unwrap();
        for i in 0..m.n_rows() {
            assert_eq!(model.predict_proba_staged(m.row(i), 20), model.predict_proba(m.row(i)));
        }
    }

    #[test]
    fn newton_leaf_value() {
        // residuals 0.5, 0.5: num 1, den 0.5 -> 2/3 * 2
        let v = newton_leaf(&[0, 1], &[0.5, 0.5]);
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(newton_leaf(&[0], &[0.0]), 0.0);
    }

    #[test]
    fn invalid_hyper() {
        let m = toy(10);
        assert!(gb_fit(&m, &GbHyper { subsample: 0.0, ..GbHyper::default() }, 0).is_err());
        assert!(gb_fit(&m, &GbHyper { shrinkage: 0.0, ..GbHyper::default() }, 0).is_err());
    }
}
