use serde::{Deserialize, Serialize};
use skyport_core::eval::{evaluate, metrics, ConfusionMatrix, MetricsReport};
use skyport_core::learners::argmax;
use skyport_core::{Demand, LearnerKind, TrainedModel};

use crate::artifacts::{fixed, read_json, read_text, write_csv, write_json, Layout};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::stages::train::{Selected, Timing};
use crate::stages::Prepared;

pub const METRICS_HEADER: [&str; 7] = ["k", "learner", "evaluation", "class", "precision", "recall", "f1"];
pub const TIMING_HEADER: [&str; 5] = ["k", "learner", "grid_seconds", "fit_seconds", "training_seconds"];

/// One line of the per-class table: three class rows and an `average` row
/// per (K, learner, evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub k: usize,
    pub learner: LearnerKind,
    /// `test` (held-out split) or `cv` (pooled cross-validation folds).
    pub evaluation: String,
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRecord {
    pub k: usize,
    pub learner: LearnerKind,
    pub evaluation: String,
    /// `counts[actual][predicted]`, classes ordered low, moderate, high.
    pub counts: [[u64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub rows: Vec<MetricsRow>,
    pub confusion: Vec<ConfusionRecord>,
}

impl MetricsFile {
    /// Test-split macro-F1 of `learner` at `k`.
    pub fn test_macro_f1(&self, k: usize, learner: LearnerKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.k == k && r.learner == learner && r.evaluation == "test" && r.class == "average")
            .map(|r| r.f1)
    }
}

/// The constant predictor of the most frequent training class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub k: usize,
    pub majority_class: Demand,
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
}

fn rows_of(k: usize, learner: LearnerKind, evaluation: &str, report: &MetricsReport) -> Vec<MetricsRow> {
    let named = Demand::ALL
        .iter()
        .map(|d| (d.as_str(), report.classes[d.index()]))
        .chain([("average", report.macro_avg)]);
    named
        .map(|(class, m)| MetricsRow {
            k,
            learner,
            evaluation: evaluation.to_string(),
            class: class.to_string(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        })
        .collect()
}

pub fn baseline(k: usize, train_classes: [usize; 3], test_labels: &[Demand]) -> Baseline {
    let counts = train_classes.map(|c| c as f64);
    let majority = Demand::from_index(argmax(&counts));
    let mut cm = ConfusionMatrix::default();
    for d in test_labels {
        cm.counts[d.index()][majority.index()] += 1;
    }
    let report = metrics(&cm, 0.0);
    Baseline {
        k,
        majority_class: majority,
        test_accuracy: cm.accuracy(),
        test_macro_f1: report.macro_avg.f1,
    }
}

pub fn run(config: &RunConfig) -> CliResult<MetricsFile> {
    let layout = Layout::new(&config.output);
    let hint = "run `skyport train` first";
    let mut file = MetricsFile {
        rows: Vec::new(),
        confusion: Vec::new(),
    };
    let mut baselines = Vec::new();
    let mut timings: Vec<Timing> = Vec::new();
    for &k in &config.k_values {
        let prepared = Prepared::load(&layout, k)?;
        let train = prepared.train_matrix()?;
        let test = prepared.test_matrix()?;
        baselines.push(baseline(k, train.class_counts(), test.labels()));
        for &learner in &config.learners {
            let model = TrainedModel::from_json(&read_text(
                &layout.learner_file(k, "models", learner, "json"),
                hint,
            )?)?;
            let selected: Selected = read_json(&layout.learner_file(k, "cv", learner, "json"), hint)?;
            for (evaluation, cm) in [("test", evaluate(&model, &test)), ("cv", selected.cell.pooled)] {
                file.rows.extend(rows_of(k, learner, evaluation, &metrics(&cm, 0.0)));
                file.confusion.push(ConfusionRecord {
                    k,
                    learner,
                    evaluation: evaluation.to_string(),
                    counts: cm.counts,
                });
            }
            timings.push(read_json(&layout.learner_file(k, "timing", learner, "json"), hint)?);
            println!(
                "evaluate k={k} {learner}: test macro-F1 {:.4}",
                file.test_macro_f1(k, learner).unwrap_or(0.0)
            );
        }
    }

    write_json(&layout.file("metrics.json"), &file)?;
    let rows: Vec<Vec<String>> = file
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.learner.to_string(),
                r.evaluation.clone(),
                r.class.clone(),
                fixed(r.precision, 4),
                fixed(r.recall, 4),
                fixed(r.f1, 4),
            ]
        })
        .collect();
    write_csv(&layout.file("metrics.csv"), &METRICS_HEADER, &rows)?;

    write_json(&layout.file("baseline.json"), &baselines)?;
    let rows: Vec<Vec<String>> = baselines
        .iter()
        .map(|b| {
            vec![
                b.k.to_string(),
                b.majority_class.to_string(),
                fixed(b.test_accuracy, 4),
                fixed(b.test_macro_f1, 4),
            ]
        })
        .collect();
    write_csv(
        &layout.file("baseline.csv"),
        &["k", "majority_class", "test_accuracy", "test_macro_f1"],
        &rows,
    )?;

    write_json(&layout.file("timing.json"), &timings)?;
    let rows: Vec<Vec<String>> = timings
        .iter()
        .map(|t| {
            vec![
                t.k.to_string(),
                t.learner.to_string(),
                fixed(t.grid_seconds, 2),
                fixed(t.fit_seconds, 2),
                fixed(t.training_seconds, 2),
            ]
        })
        .collect();
    write_csv(&layout.file("timing.csv"), &TIMING_HEADER, &rows)?;
    Ok(file)
}
