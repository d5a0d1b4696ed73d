//! Entropy-split binary decision trees.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature among the node's rows; a one-hot column therefore splits at
//! 0.5. Rows with `value <= threshold` go left. Row weights act as
//! multiplicities, so a bootstrap resample is just a weight vector.

use serde::{Deserialize, Serialize};

use super::{argmax, Classifier, N_CLASSES};
use crate::error::{Error, Result};
use crate::features::{Demand, FeatureMatrix};
use crate::seed::Rng;

/// Gains closer than this are treated as ties.
pub const GAIN_TIE_EPS: f64 = 1e-12;

/// Column-major copy of a design matrix for split search.
#[derive(Debug, Clone)]
pub struct TreeData {
    n_rows: usize,
    n_cols: usize,
    columns: Vec<f64>,
    labels: Vec<usize>,
    binary: Vec<bool>,
}

impl TreeData {
    pub fn from_matrix(matrix: &FeatureMatrix) -> Self {
        let (n_rows, n_cols) = (matrix.n_rows(), matrix.n_cols());
        let mut columns = vec![0.0; n_rows * n_cols];
        for i in 0..n_rows {
            for (j, &v) in matrix.row(i).iter().enumerate() {
                columns[j * n_rows + i] = v;
            }
        }
        let binary = (0..n_cols)
            .map(|j| {
                columns[j * n_rows..(j + 1) * n_rows]
                    .iter()
                    .all(|&v| v == 0.0 || v == 1.0)
            })
            .collect();
        TreeData {
            n_rows,
            n_cols,
            columns,
            labels: (0..n_rows).map(|i| matrix.label(i)).collect(),
            binary,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col * self.n_rows + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.columns[col * self.n_rows..(col + 1) * self.n_rows]
    }

    pub fn is_binary(&self, col: usize) -> bool {
        self.binary[col]
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }
}

/// Shannon entropy in bits of a (weighted) class histogram; `0 log 0 = 0`.
pub fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            p * p.log2()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn information_gain(parent: f64, left: &[f64; N_CLASSES], right: &[f64; N_CLASSES]) -> f64 {
    let wl: f64 = left.iter().sum();
    let wr: f64 = right.iter().sum();
    let w = wl + wr;
    parent - (wl / w) * entropy(left) - (wr / w) * entropy(right)
}

/// Best information-gain split among `features`, or `None` if no candidate
/// reaches `min_gain`. Ties go to the lowest feature, then lowest threshold.
pub fn best_split(
    data: &TreeData,
    rows: &[usize],
    weights: &[f64],
    features: &[usize],
    min_gain: f64,
) -> Option<Split> {
    best_split_with_min_leaf(data, rows, weights, features, min_gain, 0.0)
}

pub(crate) fn best_split_with_min_leaf(
    data: &TreeData,
    rows: &[usize],
    weights: &[f64],
    features: &[usize],
    min_gain: f64,
    min_leaf: f64,
) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let mut totals = [0.0; N_CLASSES];
    for &r in rows {
        totals[data.label(r)] += weights[r];
    }
    let parent = entropy(&totals);
    let mut ordered = features.to_vec();
    ordered.sort_unstable();

    let mut best: Option<Split> = None;
    let mut consider = |feature: usize, threshold: f64, left: &[f64; N_CLASSES]| {
        let right: [f64; N_CLASSES] = std::array::from_fn(|c| totals[c] - left[c]);
        let (wl, wr) = (left.iter().sum::<f64>(), right.iter().sum::<f64>());
        if wl <= 0.0 || wr <= 0.0 || wl < min_leaf || wr < min_leaf {
            return;
        }
        let gain = information_gain(parent, left, &right);
        if best.is_none_or(|b| gain > b.gain + GAIN_TIE_EPS) {
            best = Some(Split {
                feature,
                threshold,
                gain,
            });
        }
    };

    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for &f in &ordered {
        let column = data.column(f);
        if data.is_binary(f) {
            let mut zeros = [0.0; N_CLASSES];
            let mut n_zero = 0usize;
            for &r in rows {
                if column[r] == 0.0 {
                    zeros[data.label(r)] += weights[r];
                    n_zero += 1;
                }
            }
            if n_zero > 0 && n_zero < rows.len() {
                consider(f, 0.5, &zeros);
            }
            continue;
        }
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (column[r], r)));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0.0; N_CLASSES];
        for pair in sorted.windows(2) {
            let (v, r) = pair[0];
            left[data.label(r)] += weights[r];
            let next = pair[1].0;
            if next > v {
                consider(f, 0.5 * (v + next), &left);
            }
        }
    }
    best.filter(|b| b.gain >= min_gain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeHyper {
    /// `None` grows until another stopping rule applies.
    pub max_depth: Option<usize>,
    pub min_gain: f64,
    /// Minimum total row weight on each side of a split.
    pub min_leaf: f64,
}

impl Default for TreeHyper {
    fn default() -> Self {
        TreeHyper {
            max_depth: None,
            min_gain: 1e-7,
            min_leaf: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: [f64; N_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    pub hyper: TreeHyper,
}

impl DecisionTree {
    pub fn leaf_for(&self, row: &[f64]) -> &[f64; N_CLASSES] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

impl Classifier for DecisionTree {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        *self.leaf_for(row)
    }
}

fn leaf(rows: &[usize], weights: &[f64], data: &TreeData) -> TreeNode {
    let mut dist = [0.0; N_CLASSES];
    for &r in rows {
        dist[data.label(r)] += weights[r];
    }
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        dist.iter_mut().for_each(|d| *d /= total);
    }
    TreeNode::Leaf { distribution: dist }
}

/// Grow a tree on the rows with positive weight. With `mtry = Some(k)` each
/// node searches a fresh random subset of `k` features drawn from `rng`.
pub(crate) fn grow(
    data: &TreeData,
    weights: &[f64],
    hyper: &TreeHyper,
    mtry: Option<usize>,
    mut rng: Option<&mut Rng>,
) -> DecisionTree {
    let rows: Vec<usize> = (0..data.n_rows()).filter(|&r| weights[r] > 0.0).collect();
    let all_features: Vec<usize> = (0..data.n_cols()).collect();
    let mut nodes = vec![leaf(&rows, weights, data)];
    let mut stack = vec![(0usize, rows, 0usize)];

    while let Some((index, rows, depth)) = stack.pop() {
        if hyper.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        let total: f64 = rows.iter().map(|&r| weights[r]).sum();
        if total < 2.0 * hyper.min_leaf {
            continue;
        }
        if let TreeNode::Leaf { distribution } = &nodes[index] {
            if distribution.iter().filter(|&&p| p > 0.0).count() < 2 {
                continue;
            }
        }
        let features = match (mtry, rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < data.n_cols() => {
                rand::seq::index::sample(rng, data.n_cols(), k).into_vec()
            }
            _ => all_features.clone(),
        };
        let Some(split) =
            best_split_with_min_leaf(data, &rows, weights, &features, hyper.min_gain, hyper.min_leaf)
        else {
            continue;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| data.value(r, split.feature) <= split.threshold);
        let left = nodes.len();
        nodes.push(leaf(&left_rows, weights, data));
        nodes.push(leaf(&right_rows, weights, data));
        nodes[index] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right: left + 1,
        };
        stack.push((left + 1, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    DecisionTree {
        nodes,
        hyper: hyper.clone(),
    }
}

pub fn tree_fit(matrix: &FeatureMatrix, weights: &[f64], hyper: &TreeHyper) -> Result<DecisionTree> {
    if weights.len() != matrix.n_rows() {
        return Err(Error::argument("one weight per row is required"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::argument("weights must be finite and non-negative"));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::EmptyDataset("every row has zero weight".into()));
    }
    Ok(grow(&TreeData::from_matrix(matrix), weights, hyper, None, None))
}

pub fn majority(dist: &[f64; N_CLASSES]) -> Demand {
    Demand::from_index(argmax(dist))
}
