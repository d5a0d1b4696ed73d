//! Feed-forward network with one sigmoid hidden layer and a softmax output,
//! trained by full-batch backpropagation on mean cross-entropy.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{softmax, Classifier, SparseRows, N_CLASSES};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnHyper {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for AnnHyper {
    fn default() -> Self {
        AnnHyper {
            hidden: 30,
            learning_rate: 0.05,
            epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub n_inputs: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    /// Input-to-hidden weights, input-major: `w_in[j * hidden + h]`.
    pub w_in: Vec<f64>,
    pub b_hidden: Vec<f64>,
    /// Hidden-to-output weights, class-major: `w_out[c * hidden + h]`.
    pub w_out: Vec<f64>,
    pub b_out: [f64; N_CLASSES],
    pub loss_trace: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl AnnModel {
    pub fn zeros(n_inputs: usize, hidden: usize) -> Self {
        AnnModel {
            n_inputs,
            hidden,
            learning_rate: 0.0,
            w_in: vec![0.0; n_inputs * hidden],
            b_hidden: vec![0.0; hidden],
            w_out: vec![0.0; N_CLASSES * hidden],
            b_out: [0.0; N_CLASSES],
            loss_trace: Vec::new(),
        }
    }

    /// Uniform in `+-0.5 / sqrt(fan_in)` for both weight layers, zero biases.
    pub fn initialize(n_inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut model = AnnModel::zeros(n_inputs, hidden);
        let bound_in = 0.5 / (n_inputs.max(1) as f64).sqrt();
        let bound_out = 0.5 / (hidden as f64).sqrt();
        for w in &mut model.w_in {
            *w = rng.random_range(-bound_in..=bound_in);
        }
        for w in &mut model.w_out {
            *w = rng.random_range(-bound_out..=bound_out);
        }
        model
    }

    pub fn n_params(&self) -> usize {
        self.w_in.len() + self.b_hidden.len() + self.w_out.len() + N_CLASSES
    }

    /// Flat parameters: `w_in`, `b_hidden`, `w_out`, `b_out`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.w_in);
        p.extend_from_slice(&self.b_hidden);
        p.extend_from_slice(&self.w_out);
        p.extend_from_slice(&self.b_out);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params());
        let (w_in, rest) = params.split_at(self.w_in.len());
        let (b_hidden, rest) = rest.split_at(self.hidden);
        let (w_out, b_out) = rest.split_at(self.w_out.len());
        self.w_in.copy_from_slice(w_in);
        self.b_hidden.copy_from_slice(b_hidden);
        self.w_out.copy_from_slice(w_out);
        self.b_out.copy_from_slice(b_out);
    }

    fn output(&self, activations: &[f64]) -> [f64; N_CLASSES] {
        let h = self.hidden;
        softmax(std::array::from_fn(|c| {
            self.b_out[c]
                + self.w_out[c * h..(c + 1) * h]
                    .iter()
                    .zip(activations)
                    .map(|(w, a)| w * a)
                    .sum::<f64>()
        }))
    }

    fn hidden_from_sparse(&self, entries: impl Iterator<Item = (usize, f64)>, out: &mut [f64]) {
        let h = self.hidden;
        out.copy_from_slice(&self.b_hidden);
        for (j, v) in entries {
            for (z, w) in out.iter_mut().zip(&self.w_in[j * h..(j + 1) * h]) {
                *z += w * v;
            }
        }
        out.iter_mut().for_each(|z| *z = sigmoid(*z));
    }

    /// Mean cross-entropy and flat gradient (same layout as [`Self::params`]).
    fn sparse_loss_and_gradient(&self, data: &SparseRows) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let off_b_hidden = self.w_in.len();
        let off_w_out = off_b_hidden + h;
        let off_b_out = off_w_out + self.w_out.len();
        let mut grad = vec![0.0; self.n_params()];
        let mut act = vec![0.0; h];
        let mut delta_hidden = vec![0.0; h];
        let mut loss = 0.0;

        for i in 0..data.n_rows() {
            self.hidden_from_sparse(data.row(i), &mut act);
            let p = self.output(&act);
            let y = data.labels[i];
            loss -= p[y].max(f64::MIN_POSITIVE).ln();

            delta_hidden.fill(0.0);
            for c in 0..N_CLASSES {
                let d = p[c] - f64::from(u8::from(c == y));
                grad[off_b_out + c] += d;
                let w_row = &self.w_out[c * h..(c + 1) * h];
                let g_row = &mut grad[off_w_out + c * h..off_w_out + (c + 1) * h];
                for k in 0..h {
                    g_row[k] += d * act[k];
                    delta_hidden[k] += d * w_row[k];
                }
            }
            for k in 0..h {
                delta_hidden[k] *= act[k] * (1.0 - act[k]);
                grad[off_b_hidden + k] += delta_hidden[k];
            }
            for (j, v) in data.row(i) {
                for (g, d) in grad[j * h..(j + 1) * h].iter_mut().zip(&delta_hidden) {
                    *g += v * d;
                }
            }
        }
        let m = data.n_rows() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (loss / m, grad)
    }

    pub fn loss_and_gradient(&self, matrix: &FeatureMatrix) -> (f64, Vec<f64>) {
        assert_eq!(matrix.n_cols(), self.n_inputs);
        self.sparse_loss_and_gradient(&SparseRows::from_matrix(matrix))
    }

    pub fn hidden_activations(&self, row: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.hidden];
        let entries = row.iter().copied().enumerate().filter(|(_, v)| *v != 0.0);
        self.hidden_from_sparse(entries, &mut act);
        act
    }
}

impl Classifier for AnnModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        self.output(&self.hidden_activations(row))
    }
}

pub fn ann_fit(matrix: &FeatureMatrix, hyper: &AnnHyper, seed: u64) -> Result<AnnModel> {
    if hyper.hidden == 0 {
        return Err(Error::argument("hidden layer needs at least one node"));
    }
    if !(hyper.learning_rate >= 0.0 && hyper.learning_rate.is_finite()) {
        return Err(Error::argument("learning rate must be non-negative"));
    }
    let data = SparseRows::from_matrix(matrix);
    let mut model = AnnModel::initialize(matrix.n_cols(), hyper.hidden, seed);
    model.learning_rate = hyper.learning_rate;
    let mut params = model.params();

    for epoch in 0..hyper.epochs {
        let (loss, grad) = model.sparse_loss_and_gradient(&data);
        if !loss.is_finite() {
            return Err(Error::Training {
                iteration: epoch,
                reason: "non-finite loss".into(),
            });
        }
        model.loss_trace.push(loss);
        if hyper.learning_rate == 0.0 {
            continue;
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= hyper.learning_rate * g;
        }
        model.set_params(&params);
    }
    Ok(model)
}
