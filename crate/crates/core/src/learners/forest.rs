//! Random forests: bootstrap-resampled entropy trees with per-node feature
//! subsampling, combined by hard majority vote.

use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree, TreeData, TreeHyper};
use super::{argmax, Classifier, N_CLASSES};
use crate::error::{Error, Result};
use crate::features::{Demand, FeatureMatrix};
use crate::seed::{derive_indexed, rng_from};

/// Number of features searched at each node, as a rule on the total `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mtry {
    Sqrt,
    Half,
    Third,
    Quarter,
    All,
    Count(usize),
}

impl Mtry {
    pub const GRID: [Mtry; 4] = [Mtry::Sqrt, Mtry::Half, Mtry::Third, Mtry::Quarter];

    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            Mtry::Sqrt => (n_features as f64).sqrt().floor() as usize,
            Mtry::Half => n_features / 2,
            Mtry::Third => n_features / 3,
            Mtry::Quarter => n_features / 4,
            Mtry::All => n_features,
            Mtry::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl fmt::Display for Mtry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mtry::Sqrt => f.write_str("sqrt"),
            Mtry::Half => f.write_str("half"),
            Mtry::Third => f.write_str("third"),
            Mtry::Quarter => f.write_str("quarter"),
            Mtry::All => f.write_str("all"),
            Mtry::Count(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfHyper {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub bootstrap: bool,
    pub tree: TreeHyper,
}

impl Default for RfHyper {
    fn default() -> Self {
        RfHyper {
            n_trees: 100,
            mtry: Mtry::Sqrt,
            bootstrap: true,
            tree: TreeHyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub n_features: usize,
    pub mtry: usize,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
}

impl RfModel {
    /// Fraction of trees voting for each class.
    pub fn vote_shares(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut votes = [0.0; N_CLASSES];
        for t in &self.trees {
            votes[argmax(t.leaf_for(row))] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.map(|v| v / n)
    }
}

impl Classifier for RfModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        self.vote_shares(row)
    }

    fn predict(&self, row: &[f64]) -> Demand {
        let mut votes = [0usize; N_CLASSES];
        for t in &self.trees {
            votes[argmax(t.leaf_for(row))] += 1;
        }
        let mut best = 0;
        for c in 1..N_CLASSES {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        Demand::from_index(best)
    }
}

pub fn rf_fit(matrix: &FeatureMatrix, hyper: &RfHyper, seed: u64) -> Result<RfModel> {
    if hyper.n_trees == 0 {
        return Err(Error::argument("a forest needs at least one tree"));
    }
    let data = TreeData::from_matrix(matrix);
    let m = data.n_rows();
    let mtry = hyper.mtry.resolve(data.n_cols());
    let tree_seeds: Vec<u64> = (0..hyper.n_trees)
        .map(|t| derive_indexed(seed, "tree", t))
        .collect();

    let trees = tree_seeds
        .par_iter()
        .map(|&tree_seed| {
            let mut rng = rng_from(tree_seed);
            let weights = if hyper.bootstrap {
                let mut w = vec![0.0; m];
                for _ in 0..m {
                    w[rng.random_range(0..m)] += 1.0;
                }
                w
            } else {
                vec![1.0; m]
            };
            grow(&data, &weights, &hyper.tree, Some(mtry), Some(&mut rng))
        })
        .collect();

    Ok(RfModel {
        n_features: data.n_cols(),
        mtry,
        tree_seeds,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::{TreeNode, tree_fit};

    fn stump(class: usize) -> DecisionTree {
        let mut distribution = [0.0; N_CLASSES];
        distribution[class] = 1.0;
        DecisionTree {
            nodes: vec![TreeNode::Leaf { distribution }],
            hyper: TreeHyper::default(),
        }
    }

    fn forest(classes: &[usize]) -> RfModel {
        RfModel {
            n_features: 1,
            mtry: 1,
            tree_seeds: vec![0; classes.len()],
            trees: classes.iter().map(|&c| stump(c)).collect(),
        }
    }

    #[test]
    fn majority_vote_and_shares() {
        let f = forest(&[0, 0, 2]);
        assert_eq!(f.predict(&[0.0]), Demand::Low);
        let p = f.predict_proba(&[0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && p[1] == 0.0 && (p[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(forest(&[0, 2]).predict(&[0.0]), Demand::Low);
    }

    #[test]
    fn mtry_rules() {
        assert_eq!(Mtry::Sqrt.resolve(60), 7);
        assert_eq!(Mtry::Half.resolve(60), 30);
        assert_eq!(Mtry::Third.resolve(60), 20);
        assert_eq!(Mtry::Quarter.resolve(60), 15);
        assert_eq!(Mtry::Quarter.resolve(2), 1);
        assert_eq!(Mtry::Count(99).resolve(5), 5);
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64, ((i * 5) % 11) as f64, (i % 2) as f64])
            .collect();
        let labels = (0..30).map(|i| Demand::from_index((i / 3) % 3)).collect();
        let m = FeatureMatrix::from_rows(&rows, labels).unwrap();
        let hyper = RfHyper {
            n_trees: 1,
            mtry: Mtry::All,
            bootstrap: false,
            tree: TreeHyper::default(),
        };
        let f = rf_fit(&m, &hyper, 5).unwrap();
        let t = tree_fit(&m, &[1.0; 30], &TreeHyper::default()).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn zero_trees_rejected() {
        let m = FeatureMatrix::from_rows(&[vec![0.0]], vec![Demand::Low]).unwrap();
        let hyper = RfHyper {
            n_trees: 0,
            ..RfHyper::default()
        };
        assert!(rf_fit(&m, &hyper, 0).is_err());
    }
}
