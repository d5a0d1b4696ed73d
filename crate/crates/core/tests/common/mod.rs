//! Oracle checks shared by the core test suites and the acceptance target.
//!
//! Each check draws its random instances from a fixed seed and reports a
//! pass flag together with the worst observed discrepancy.

#![allow(dead_code)]

use rand::Rng;
use skyport_core::features::{Demand, FeatureMatrix};
use skyport_core::geo::{kmeans_fit, KMeansParams};
use skyport_core::learners::ann::AnnModel;
use skyport_core::learners::boosting::gb_fit;
use skyport_core::learners::forest::{rf_fit, Mtry};
use skyport_core::learners::logistic::loss_and_gradient;
use skyport_core::learners::tree::{best_split, tree_fit, Split, TreeData, TreeHyper};
use skyport_core::learners::{Classifier, GbHyper, RfHyper};
use skyport_core::seed::{derive_indexed, rng_from};

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> FeatureMatrix {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let labels = (0..rows)
        .map(|i| {
            // all three classes present, remaining labels random
            if i < 3 {
                Demand::from_index(i)
            } else {
                Demand::from_index(rng.random_range(0..3))
            }
        })
        .collect();
    FeatureMatrix::from_rows(&data, labels).unwrap()
}

/// Central differences of `loss` at `params`.
fn numeric_gradient(params: &[f64], loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_STEP;
            let up = loss(&p);
            p[i] = orig - FD_STEP;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `max |a - n| / max(max |a|, max |n|)`: the relative error of the whole
/// gradient vector in the max norm.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn lr_gradient_check(instances: usize, seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    for t in 0..instances {
        let mut rng = rng_from(derive_indexed(seed, "lr-grad", t));
        let matrix = random_matrix(&mut rng, 5, 4, -2.0, 2.0);
        let params: Vec<f64> = (0..3 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, analytic) = loss_and_gradient(&params, &matrix);
        let numeric = numeric_gradient(&params, |p| loss_and_gradient(p, &matrix).0);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Outcome::new(
        worst < FD_TOLERANCE,
        format!("{instances} instances, max relative error {worst:.2e}"),
    )
}

pub fn ann_gradient_check(instances: usize, seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    for t in 0..instances {
        let mut rng = rng_from(derive_indexed(seed, "ann-grad", t));
        let matrix = random_matrix(&mut rng, 6, 3, -2.0, 2.0);
        let mut model = AnnModel::zeros(3, 5);
        let params: Vec<f64> = (0..model.n_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        model.set_params(&params);
        let (_, analytic) = model.loss_and_gradient(&matrix);
        let numeric = numeric_gradient(&params, |p| {
            let mut m = model.clone();
            m.set_params(p);
            m.loss_and_gradient(&matrix).0
        });
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Outcome::new(
        worst < FD_TOLERANCE,
        format!("{instances} instances (H=5), max relative error {worst:.2e}"),
    )
}

fn entropy_bits(counts: &[f64; 3]) -> f64 {
    let total: f64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / total) * (c / total).log2())
        .sum()
}

/// Exhaustive enumeration of every (feature, midpoint) split.
pub fn brute_force_split(
    matrix: &FeatureMatrix,
    weights: &[f64],
    features: &[usize],
    min_gain: f64,
) -> Option<Split> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let counts = |subset: &[usize]| {
        let mut c = [0.0; 3];
        for &r in subset {
            c[matrix.label(r)] += weights[r];
        }
        c
    };
    let parent = counts(&rows);
    let total: f64 = parent.iter().sum();
    let mut best: Option<Split> = None;
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    for &f in &sorted_features {
        let mut values: Vec<f64> = rows.iter().map(|&r| matrix.get(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = 0.5 * (pair[0] + pair[1]);
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| matrix.get(r, f) <= threshold);
            let (cl, cr) = (counts(&left), counts(&right));
            let (wl, wr) = (cl.iter().sum::<f64>(), cr.iter().sum::<f64>());
            if wl <= 0.0 || wr <= 0.0 {
                continue;
            }
            let gain = entropy_bits(&parent)
                - (wl / total) * entropy_bits(&cl)
                - (wr / total) * entropy_bits(&cr);
            if best.is_none_or(|b| gain > b.gain + 1e-12) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain >= min_gain)
}

pub fn split_oracle(instances: usize, seed: u64) -> Outcome {
    let mut mismatches = 0;
    let mut first = String::new();
    for t in 0..instances {
        let mut rng = rng_from(derive_indexed(seed, "split", t));
        let rows = rng.random_range(2..=8);
        let cols = rng.random_range(1..=3);
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|j| {
                        if j == 0 && rng.random_bool(0.5) {
                            rng.random_range(0..2) as f64
                        } else {
                            rng.random_range(0..4) as f64 * 0.5
                        }
                    })
                    .collect()
            })
            .collect();
        let labels = (0..rows)
            .map(|_| Demand::from_index(rng.random_range(0..3)))
            .collect();
        let matrix = FeatureMatrix::from_rows(&data, labels).unwrap();
        let weights: Vec<f64> = (0..rows).map(|_| rng.random_range(1..=3) as f64).collect();
        let features: Vec<usize> = (0..cols).collect();
        let min_gain = 1e-7;
        let fast = best_split(
            &TreeData::from_matrix(&matrix),
            &(0..rows).collect::<Vec<_>>(),
            &weights,
            &features,
            min_gain,
        );
        let slow = brute_force_split(&matrix, &weights, &features, min_gain);
        let agree = match (fast, slow) {
            (None, None) => true,
            (Some(a), Some(b)) => {
                a.feature == b.feature && a.threshold == b.threshold && (a.gain - b.gain).abs() < 1e-9
            }
            _ => false,
        };
        if !agree {
            mismatches += 1;
            if first.is_empty() {
                first = format!("; first mismatch at instance {t}: {fast:?} vs {slow:?}");
            }
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("{instances} instances (<=8 rows, <=3 features), {mismatches} mismatches{first}"),
    )
}

pub fn kmeans_monotone(instances: usize, seed: u64) -> Outcome {
    let mut violations = 0;
    for t in 0..instances {
        let mut rng = rng_from(derive_indexed(seed, "kmeans", t));
        let n = rng.random_range(10..200);
        let k = rng.random_range(1..=6.min(n));
        let points: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(40.5..41.0), rng.random_range(-74.2..-73.7)])
            .collect();
        let model = kmeans_fit(&points, KMeansParams::new(k, t as u64)).unwrap();
        let scale = model.trace.first().copied().unwrap_or(0.0).max(1e-300);
        if model
            .trace
            .windows(2)
            .any(|w| w[1] > w[0] + 1e-12 * scale)
        {
            violations += 1;
        }
    }
    Outcome::new(
        violations == 0,
        format!("{instances} instances, {violations} traces increased"),
    )
}

pub fn kmeans_two_clusters(seeds: u64) -> Outcome {
    let points = [[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
    let mut wrong = 0;
    for seed in 0..seeds {
        let model = kmeans_fit(&points, KMeansParams::new(2, seed)).unwrap();
        let mut c = model.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if c != vec![[0.0, 0.5], [10.0, 10.5]] {
            wrong += 1;
        }
    }
    Outcome::new(
        wrong == 0,
        format!("{seeds} seeds, {wrong} missed the optimal partition"),
    )
}

/// Rows with a few informative columns plus noise.
pub fn noisy_dataset(rows: usize, seed: u64) -> FeatureMatrix {
    let mut rng = rng_from(seed);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            vec![
                rng.random_range(0..2) as f64,
                rng.random_range(0..2) as f64,
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0..2) as f64,
            ]
        })
        .collect();
    let labels = data
        .iter()
        .map(|r| {
            let score = r[0] + r[1] + 0.5 * r[2] + rng.random_range(-0.5..0.5);
            Demand::from_index(if score < 0.5 { 0 } else if score < 1.5 { 1 } else { 2 })
        })
        .collect();
    FeatureMatrix::from_rows(&data, labels).unwrap()
}

pub fn rf_degenerate(seed: u64) -> Outcome {
    let train = noisy_dataset(150, seed);
    let probe = noisy_dataset(500, seed + 1);
    let hyper = RfHyper {
        n_trees: 1,
        mtry: Mtry::All,
        bootstrap: false,
        tree: TreeHyper::default(),
    };
    let forest = rf_fit(&train, &hyper, seed).unwrap();
    let tree = tree_fit(&train, &vec![1.0; train.n_rows()], &TreeHyper::default()).unwrap();
    let differing = (0..probe.n_rows())
        .filter(|&i| forest.predict(probe.row(i)) != tree.predict(probe.row(i)))
        .count();
    let same_structure = forest.trees[0] == tree;
    Outcome::new(
        differing == 0 && same_structure,
        format!("500 rows, {differing} differing predictions, identical tree: {same_structure}"),
    )
}

pub fn gb_prior(seed: u64) -> Outcome {
    let train = noisy_dataset(120, seed);
    let model = gb_fit(
        &train,
        &GbHyper {
            n_trees: 0,
            ..GbHyper::default()
        },
        seed,
    )
    .unwrap();
    let counts = train.class_counts();
    let n = train.n_rows() as f64;
    let mut worst = 0.0f64;
    for i in 0..train.n_rows() {
        let p = model.predict_proba(train.row(i));
        for c in 0..3 {
            worst = worst.max((p[c] - counts[c] as f64 / n).abs());
        }
    }
    Outcome::new(worst < 1e-12, format!("max deviation from class frequencies {worst:.1e}"))
}

pub fn gb_deviance_monotone(seed: u64) -> Outcome {
    let train = noisy_dataset(300, seed);
    let hyper = GbHyper {
        n_trees: 100,
        shrinkage: 0.05,
        subsample: 1.0,
        ..GbHyper::default()
    };
    let model = gb_fit(&train, &hyper, seed).unwrap();
    let increases = model
        .deviance_trace
        .windows(2)
        .filter(|w| w[1] > w[0])
        .count();
    Outcome::new(
        increases == 0,
        format!(
            "100 stages, deviance {:.4} -> {:.4}, {increases} increases",
            model.deviance_trace[0],
            model.deviance_trace.last().unwrap()
        ),
    )
}
