//! Multinomial logistic regression.
//!
//! `P(y = c | x) = exp(b_c . x) / sum_c' exp(b_c' . x)` with a bias term per
//! class, trained by full-batch gradient descent on the mean negative
//! log-likelihood. A step that would increase the loss is halved until it
//! does not, so the recorded loss trace never increases.

use serde::{Deserialize, Serialize};

use super::{softmax, Classifier, SparseRows, N_CLASSES};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrHyper {
    pub max_iter: usize,
    /// Initial gradient step.
    pub step: f64,
    /// Stop once an iteration improves the loss by less than this.
    pub tol: f64,
}

impl Default for LrHyper {
    fn default() -> Self {
        LrHyper {
            max_iter: 300,
            step: 1.0,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub n_features: usize,
    /// One vector per class: `[bias, b_1, ..., b_N]`.
    pub weights: Vec<Vec<f64>>,
    pub loss_trace: Vec<f64>,
}

impl LrModel {
    pub fn zeros(n_features: usize) -> Self {
        LrModel {
            n_features,
            weights: vec![vec![0.0; n_features + 1]; N_CLASSES],
            loss_trace: Vec::new(),
        }
    }

    pub fn scores(&self, row: &[f64]) -> [f64; N_CLASSES] {
        std::array::from_fn(|c| {
            let w = &self.weights[c];
            w[0] + w[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
        })
    }

    /// Class-major flat parameter vector.
    pub fn params(&self) -> Vec<f64> {
        self.weights.concat()
    }

    pub fn from_params(n_features: usize, params: &[f64]) -> Self {
        LrModel {
            n_features,
            weights: params.chunks(n_features + 1).map(<[f64]>::to_vec).collect(),
            loss_trace: Vec::new(),
        }
    }
}

impl Classifier for LrModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        softmax(self.scores(row))
    }
}

/// Class-major `[bias, b_1..b_N]` blocks to feature-major `[term][class]`.
fn to_feature_major(params: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; params.len()];
    for c in 0..N_CLASSES {
        for t in 0..stride {
            out[t * N_CLASSES + c] = params[c * stride + t];
        }
    }
    out
}

fn to_class_major(params: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; params.len()];
    for c in 0..N_CLASSES {
        for t in 0..stride {
            out[c * stride + t] = params[t * N_CLASSES + c];
        }
    }
    out
}

/// Loss and gradient with feature-major parameters, so the three class
/// weights of a column sit next to each other.
fn sparse_loss_and_gradient(params: &[f64], data: &SparseRows) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for i in 0..data.n_rows() {
        let mut scores = [params[0], params[1], params[2]];
        for (j, v) in data.row(i) {
            let w = &params[(j + 1) * N_CLASSES..(j + 2) * N_CLASSES];
            for c in 0..N_CLASSES {
                scores[c] += w[c] * v;
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps = scores.map(|s| (s - max).exp());
        let norm: f64 = exps.iter().sum();
        let y = data.labels[i];
        loss += max + norm.ln() - scores[y];
        let residual: [f64; N_CLASSES] =
            std::array::from_fn(|c| exps[c] / norm - f64::from(u8::from(c == y)));
        for c in 0..N_CLASSES {
            grad[c] += residual[c];
        }
        for (j, v) in data.row(i) {
            let g = &mut grad[(j + 1) * N_CLASSES..(j + 2) * N_CLASSES];
            for c in 0..N_CLASSES {
                g[c] += residual[c] * v;
            }
        }
    }
    let m = data.n_rows() as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    (loss / m, grad)
}

/// Mean negative log-likelihood and its gradient at a flat parameter vector
/// laid out as in [`LrModel::params`].
pub fn loss_and_gradient(params: &[f64], matrix: &FeatureMatrix) -> (f64, Vec<f64>) {
    let stride = matrix.n_cols() + 1;
    assert_eq!(params.len(), N_CLASSES * stride);
    let (loss, grad) =
        sparse_loss_and_gradient(&to_feature_major(params, stride), &SparseRows::from_matrix(matrix));
    (loss, to_class_major(&grad, stride))
}

pub fn lr_fit(matrix: &FeatureMatrix, hyper: &LrHyper) -> Result<LrModel> {
    let classes_present = matrix.class_counts().iter().filter(|&&c| c > 0).count();
    if classes_present < 2 {
        return Err(Error::argument("logistic regression needs at least two classes"));
    }
    if !(hyper.step > 0.0) {
        return Err(Error::argument("step must be positive"));
    }
    let data = SparseRows::from_matrix(matrix);
    let mut params = vec![0.0; N_CLASSES * (matrix.n_cols() + 1)];
    let (mut loss, mut grad) = sparse_loss_and_gradient(&params, &data);
    if !loss.is_finite() {
        return Err(Error::Training {
            iteration: 0,
            reason: "non-finite loss".into(),
        });
    }
    let mut trace = vec![loss];
    let mut step = hyper.step;

    'outer: for iteration in 1..=hyper.max_iter {
        let (candidate, cand_loss, cand_grad) = loop {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (l, g) = sparse_loss_and_gradient(&candidate, &data);
            if l.is_finite() && l <= loss {
                break (candidate, l, g);
            }
            step *= 0.5;
            if step < 1e-30 {
                if !l.is_finite() {
                    return Err(Error::Training {
                        iteration,
                        reason: "non-finite loss".into(),
                    });
                }
                break 'outer;
            }
        };
        let improvement = loss - cand_loss;
        params = candidate;
        loss = cand_loss;
        grad = cand_grad;
        trace.push(loss);
        if improvement < hyper.tol {
            break;
        }
    }

    let mut model = LrModel::from_params(matrix.n_cols(), &to_class_major(&params, matrix.n_cols() + 1));
    model.loss_trace = trace;
    Ok(model)
}
