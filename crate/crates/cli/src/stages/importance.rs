use serde::{Deserialize, Serialize};
use skyport_core::importance::{permutation_importance, top_features, write_importance_csv, ImportanceTable};
use skyport_core::seed::derive_seed;
use skyport_core::{LearnerKind, TrainedModel};

use crate::artifacts::{create, fixed, read_json, read_text, write_csv, write_json, Layout};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::stages::evaluate::MetricsFile;
use crate::stages::Prepared;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeature {
    pub k: usize,
    pub learner: LearnerKind,
    pub rank: usize,
    pub feature: String,
    pub importance: f64,
    pub std: f64,
}

pub fn importance_seed(master: u64, k: usize, learner: LearnerKind) -> u64 {
    derive_seed(master, &["importance", &k.to_string(), learner.as_str()])
}

/// Learners to explain at `k`: the configured ones, or else the learner
/// with the highest test macro-F1 (earlier learners win ties).
pub fn chosen_learners(config: &RunConfig, k: usize) -> CliResult<Vec<LearnerKind>> {
    if !config.importance.learners.is_empty() {
        return Ok(config.importance.learners.clone());
    }
    let layout = Layout::new(&config.output);
    let metrics: MetricsFile = read_json(&layout.file("metrics.json"), "run `skyport evaluate` first")?;
    let mut best: Option<(LearnerKind, f64)> = None;
    for &learner in &config.learners {
        let Some(f1) = metrics.test_macro_f1(k, learner) else {
            continue;
        };
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((learner, f1));
        }
    }
    best.map(|(l, _)| vec![l]).ok_or_else(|| {
        CliError::Runtime(format!("metrics.json has no test scores for K = {k}"))
    })
}

pub fn run(config: &RunConfig) -> CliResult<Vec<TopFeature>> {
    let layout = Layout::new(&config.output);
    let mut top = Vec::new();
    for &k in &config.k_values {
        let prepared = Prepared::load(&layout, k)?;
        let test = prepared.test_matrix()?;
        for learner in chosen_learners(config, k)? {
            let model = TrainedModel::from_json(&read_text(
                &layout.learner_file(k, "models", learner, "json"),
                "run `skyport train` first",
            )?)?;
            let table: ImportanceTable = permutation_importance(
                &model,
                &test,
                test.groups(),
                config.importance.repeats,
                importance_seed(config.seed, k, learner),
            )?;
            write_json(&layout.learner_file(k, "importance", learner, "json"), &table)?;
            write_importance_csv(create(&layout.learner_file(k, "importance", learner, "csv"))?, &table)?;
            let ranked = top_features(&table, config.importance.top);
            println!(
                "importance k={k} {learner}: {}",
                ranked.iter().map(|(f, _)| f.as_str()).collect::<Vec<_>>().join(", ")
            );
            for (rank, (feature, importance)) in ranked.into_iter().enumerate() {
                let std = table
                    .rows
                    .iter()
                    .find(|r| r.feature == feature)
                    .map_or(0.0, |r| r.std);
                top.push(TopFeature {
                    k,
                    learner,
                    rank: rank + 1,
                    feature,
                    importance,
                    std,
                });
            }
        }
    }
    write_json(&layout.file("top_features.json"), &top)?;
    let rows: Vec<Vec<String>> = top
        .iter()
        .map(|t| {
            vec![
                t.k.to_string(),
                t.learner.to_string(),
                t.rank.to_string(),
                t.feature.clone(),
                fixed(t.importance, 4),
                fixed(t.std, 4),
            ]
        })
        .collect();
    write_csv(
        &layout.file("top_features.csv"),
        &["k", "learner", "rank", "feature", "importance", "std"],
        &rows,
    )?;
    Ok(top)
}
