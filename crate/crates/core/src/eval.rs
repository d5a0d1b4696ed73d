//! Train/test splitting, k-fold cross-validation, grid search, per-class
//! metrics and training-time measurement.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{encode_split, Demand, FeatureMatrix, Sample};
use crate::learners::{
    fit, AnnHyper, Classifier, GbHyper, Hyper, LearnerKind, Mtry, RfHyper, TrainedModel,
};
use crate::seed::{derive_seed, rng_from};

const N: usize = Demand::COUNT;

/// Uniform random partition of `0..m` into `round(ratio * m)` training
/// indices and the rest; both lists ascending.
pub fn split_indices(m: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::argument(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from(seed));
    let n_train = (ratio * m as f64).round() as usize;
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(
    matrix: &FeatureMatrix,
    ratio: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (train, test) = split_indices(matrix.n_rows(), ratio, seed)?;
    Ok((matrix.subset(&train), matrix.subset(&test)))
}

fn check_folds(m: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::argument("cross-validation needs at least two folds"));
    }
    if k > m {
        return Err(Error::argument(format!("cannot make {k} folds from {m} rows")));
    }
    Ok(())
}

/// `k` disjoint folds covering `0..m` whose sizes differ by at most one.
/// Each fold's indices are ascending.
pub fn kfold_indices(m: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_folds(m, k)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from(seed));
    let mut folds = vec![Vec::with_capacity(m / k + 1); k];
    for (i, idx) in order.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Folds dealt class by class so each fold keeps the class proportions.
/// Fold sizes still differ by at most one.
pub fn stratified_kfold_indices(labels: &[Demand], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_folds(labels.len(), k)?;
    let mut rng = rng_from(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in Demand::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for idx in members {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Counts with rows = actual class and columns = predicted class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N]; N],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for a in 0..N {
            for p in 0..N {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }
}

pub fn confusion(actual: &[Demand], predicted: &[Demand]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::argument(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (a, p) in actual.iter().zip(predicted) {
        cm.counts[a.index()][p.index()] += 1;
    }
    Ok(cm)
}

/// Confusion matrix of `model` over every row of `matrix`.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, matrix: &FeatureMatrix) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for i in 0..matrix.n_rows() {
        cm.counts[matrix.label(i)][model.predict(matrix.row(i)).index()] += 1;
    }
    cm
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

/// Unweighted mean of each column over the given rows.
pub fn macro_average(rows: &[ClassMetrics]) -> ClassMetrics {
    let n = rows.len().max(1) as f64;
    ClassMetrics {
        precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
        f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub learner: Option<LearnerKind>,
    pub k: Option<usize>,
    /// Indexed by [`Demand::index`].
    pub classes: [ClassMetrics; N],
    #[serde(rename = "macro")]
    pub macro_avg: ClassMetrics,
    pub train_seconds: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn with_context(mut self, learner: LearnerKind, k: usize) -> Self {
        self.learner = Some(learner);
        self.k = Some(k);
        self
    }
}

/// Per-class precision, recall and F1 plus their unweighted means. A class
/// never predicted has precision 0, a class never present has recall 0.
pub fn metrics(cm: &ConfusionMatrix, train_seconds: f64) -> MetricsReport {
    let classes: [ClassMetrics; N] = std::array::from_fn(|c| {
        let tp = cm.counts[c][c] as f64;
        let predicted: u64 = (0..N).map(|a| cm.counts[a][c]).sum();
        let actual: u64 = cm.counts[c].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        ClassMetrics::from_pr(precision, recall)
    });
    MetricsReport {
        learner: None,
        k: None,
        macro_avg: macro_average(&classes),
        classes,
        train_seconds,
        confusion: *cm,
    }
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    metrics(cm, 0.0).macro_avg.f1
}

/// Fit `hyper` on `matrix`, returning the model and the wall-clock seconds
/// spent inside the fit itself.
pub fn time_training(
    matrix: &FeatureMatrix,
    hyper: &Hyper,
    seed: u64,
) -> Result<(TrainedModel, f64)> {
    let start = Instant::now();
    let model = fit(matrix, hyper, seed)?;
    Ok((model, start.elapsed().as_secs_f64()))
}

/// Tree counts of the built-in ensemble grids: 100 to 1000 step 100.
pub fn default_tree_counts() -> Vec<usize> {
    (1..=10).map(|i| 100 * i).collect()
}

/// Hidden sizes 1, 6, 11, ... not exceeding `n_features`.
pub fn ann_hidden_sizes(n_features: usize, step: usize) -> Vec<usize> {
    (1..=n_features.max(1)).step_by(step.max(1)).collect()
}

pub const DEFAULT_ANN_RATES: [f64; 3] = [0.01, 0.05, 0.10];

pub fn rf_grid(base: &RfHyper, trees: &[usize], mtry: &[Mtry]) -> Vec<Hyper> {
    let mut grid = Vec::with_capacity(trees.len() * mtry.len());
    for &n_trees in trees {
        for &m in mtry {
            grid.push(Hyper::Rf(RfHyper {
                n_trees,
                mtry: m,
                ..base.clone()
            }));
        }
    }
    grid
}

pub fn gb_grid(base: &GbHyper, trees: &[usize]) -> Vec<Hyper> {
    trees
        .iter()
        .map(|&n_trees| {
            Hyper::Gb(GbHyper {
                n_trees,
                ..base.clone()
            })
        })
        .collect()
}

pub fn ann_grid(base: &AnnHyper, hidden: &[usize], rates: &[f64]) -> Vec<Hyper> {
    let mut grid = Vec::with_capacity(hidden.len() * rates.len());
    for &h in hidden {
        for &learning_rate in rates {
            grid.push(Hyper::Ann(AnnHyper {
                hidden: h,
                learning_rate,
                ..base.clone()
            }));
        }
    }
    grid
}

/// The built-in search space of each learner for `n_features` inputs.
/// Logistic regression has no tuned parameters, so its grid is empty.
pub fn default_grid(kind: LearnerKind, n_features: usize) -> Vec<Hyper> {
    match kind {
        LearnerKind::Lr => Vec::new(),
        LearnerKind::Rf => rf_grid(&RfHyper::default(), &default_tree_counts(), &Mtry::GRID),
        LearnerKind::Gb => gb_grid(&GbHyper::default(), &default_tree_counts()),
        LearnerKind::Ann => ann_grid(
            &AnnHyper::default(),
            &ann_hidden_sizes(n_features, 5),
            &DEFAULT_ANN_RATES,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub hyper: Hyper,
    /// Macro-F1 on each held-out fold (0 for a failed fit).
    pub fold_scores: Vec<f64>,
    pub mean_f1: f64,
    /// Held-out predictions of all folds pooled together.
    pub pooled: ConfusionMatrix,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub learner: LearnerKind,
    pub folds: usize,
    pub fold_sizes: Vec<usize>,
    pub cells: Vec<CellResult>,
    /// Index into `cells` of the first cell with the highest mean.
    pub best: usize,
    /// Seeds passed to each fold's fit, per cell.
    pub fold_seeds: Vec<Vec<u64>>,
}

impl GridResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub stratified: bool,
}

impl CvOptions {
    pub fn new(folds: usize) -> Self {
        CvOptions {
            folds,
            stratified: false,
        }
    }
}

/// Seed of the fit for one (cell, fold) unit.
pub fn cell_seed(master: u64, cell: &str, fold: usize) -> u64 {
    derive_seed(master, &["cv", cell, &fold.to_string()])
}

fn fold_partition(labels: &[Demand], options: CvOptions, seed: u64) -> Result<Vec<Vec<usize>>> {
    let fold_seed = derive_seed(seed, &["folds"]);
    if options.stratified {
        stratified_kfold_indices(labels, options.folds, fold_seed)
    } else {
        kfold_indices(labels.len(), options.folds, fold_seed)
    }
}

fn complement(m: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; m];
    fold.iter().for_each(|&i| held[i] = true);
    (0..m).filter(|&i| !held[i]).collect()
}

fn run_grid(
    grid: &[Hyper],
    fold_data: &[(FeatureMatrix, FeatureMatrix)],
    fold_sizes: Vec<usize>,
    seed: u64,
) -> Result<GridResult> {
    let Some(first) = grid.first() else {
        return Err(Error::argument("grid search needs a non-empty grid"));
    };
    let learner = first.kind();
    if grid.iter().any(|h| h.kind() != learner) {
        return Err(Error::argument("a grid must hold a single learner"));
    }
    let k = fold_data.len();
    let units: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let outcomes: Vec<Result<ConfusionMatrix>> = units
        .par_iter()
        .map(|&(c, f)| {
            let (train, held) = &fold_data[f];
            let model = fit(train, &grid[c], cell_seed(seed, &grid[c].label(), f))?;
            Ok(evaluate(&model, held))
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    let mut fold_seeds = Vec::with_capacity(grid.len());
    for (c, hyper) in grid.iter().enumerate() {
        let label = hyper.label();
        let mut fold_scores = Vec::with_capacity(k);
        let mut pooled = ConfusionMatrix::default();
        let mut error = None;
        for outcome in &outcomes[c * k..(c + 1) * k] {
            match outcome {
                Ok(cm) => {
                    fold_scores.push(macro_f1(cm));
                    pooled.add(cm);
                }
                Err(e) => {
                    fold_scores.push(0.0);
                    error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let mean_f1 = if error.is_some() {
            0.0
        } else {
            fold_scores.iter().sum::<f64>() / k as f64
        };
        fold_seeds.push((0..k).map(|f| cell_seed(seed, &label, f)).collect());
        cells.push(CellResult {
            label,
            hyper: hyper.clone(),
            fold_scores,
            mean_f1,
            pooled,
            error,
        });
    }
    let mut best = 0;
    for (i, cell) in cells.iter().enumerate() {
        if cell.mean_f1 > cells[best].mean_f1 {
            best = i;
        }
    }
    Ok(GridResult {
        learner,
        folds: k,
        fold_sizes,
        cells,
        best,
        fold_seeds,
    })
}

/// Grid search by k-fold cross-validation over an already encoded matrix.
pub fn grid_search(
    grid: &[Hyper],
    train: &FeatureMatrix,
    options: CvOptions,
    seed: u64,
) -> Result<GridResult> {
    let folds = fold_partition(train.labels(), options, seed)?;
    let fold_data: Vec<(FeatureMatrix, FeatureMatrix)> = folds
        .iter()
        .map(|f| (train.subset(&complement(train.n_rows(), f)), train.subset(f)))
        .collect();
    run_grid(grid, &fold_data, folds.iter().map(Vec::len).collect(), seed)
}

/// Grid search over cleaned, labelled samples. Demand bins and the encoder
/// are refitted on the training part of every fold, so held-out rows never
/// influence their own preprocessing. Labels only steer stratification.
pub fn grid_search_samples(
    grid: &[Hyper],
    train: &[Sample],
    options: CvOptions,
    seed: u64,
) -> Result<GridResult> {
    let labels: Vec<Demand> = train
        .iter()
        .map(|s| s.demand.unwrap_or(Demand::Low))
        .collect();
    let folds = fold_partition(&labels, options, seed)?;
    let fold_data = folds
        .iter()
        .map(|f| {
            let fit_part: Vec<Sample> = complement(train.len(), f)
                .into_iter()
                .map(|i| train[i].clone())
                .collect();
            let held: Vec<Sample> = f.iter().map(|&i| train[i].clone()).collect();
            let encoded = encode_split(&fit_part, &held)?;
            Ok((encoded.train, encoded.test))
        })
        .collect::<Result<Vec<_>>>()?;
    run_grid(grid, &fold_data, folds.iter().map(Vec::len).collect(), seed)
}

/// Cross-validation of a single configuration: a one-cell grid search.
pub fn cross_validate_samples(
    hyper: &Hyper,
    train: &[Sample],
    options: CvOptions,
    seed: u64,
) -> Result<CellResult> {
    let result = grid_search_samples(std::slice::from_ref(hyper), train, options, seed)?;
    Ok(result.cells.into_iter().next().expect("one cell"))
}
