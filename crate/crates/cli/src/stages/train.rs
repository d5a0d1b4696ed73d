use std::time::Instant;

use serde::{Deserialize, Serialize};
use skyport_core::eval::{cross_validate_samples, grid_search_samples, time_training, CellResult, GridResult};
use skyport_core::seed::derive_seed;
use skyport_core::LearnerKind;

use crate::artifacts::{fixed, write_csv, write_json, write_text, Layout};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::stages::Prepared;

/// Wall-clock cost of producing one final model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub k: usize,
    pub learner: LearnerKind,
    pub hyper: String,
    /// Grid search by cross-validation (0 when there is no grid).
    pub grid_seconds: f64,
    /// The final fit on the whole training split, on a single thread.
    pub fit_seconds: f64,
    /// Tuning plus final fit: the time needed to obtain the model.
    pub training_seconds: f64,
}

/// Cross-validated scores of the configuration that was finally fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub k: usize,
    pub learner: LearnerKind,
    pub tuned: bool,
    pub folds: usize,
    pub cell: CellResult,
}

pub fn grid_seed(master: u64, k: usize, learner: LearnerKind) -> u64 {
    derive_seed(master, &["grid", &k.to_string(), learner.as_str()])
}

pub fn fit_seed(master: u64, k: usize, learner: LearnerKind) -> u64 {
    derive_seed(master, &["fit", &k.to_string(), learner.as_str()])
}

fn write_grid(layout: &Layout, k: usize, grid: &GridResult) -> CliResult<()> {
    write_json(&layout.learner_file(k, "grid", grid.learner, "json"), grid)?;
    let mut header = vec!["cell".to_string(), "label".into(), "mean_f1".into()];
    header.extend((1..=grid.folds).map(|f| format!("fold_{f}")));
    header.push("error".into());
    let rows: Vec<Vec<String>> = grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut row = vec![(i + 1).to_string(), c.label.clone(), fixed(c.mean_f1, 4)];
            row.extend(c.fold_scores.iter().map(|s| fixed(*s, 4)));
            row.push(c.error.clone().unwrap_or_default());
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&layout.learner_file(k, "grid", grid.learner, "csv"), &header, &rows)
}

pub fn train_one(
    config: &RunConfig,
    prepared: &Prepared,
    k: usize,
    learner: LearnerKind,
) -> CliResult<Timing> {
    let layout = Layout::new(&config.output);
    let options = config.cv_options();
    let grid = config.grid(learner, prepared.encoder.n_columns());
    let search_seed = grid_seed(config.seed, k, learner);

    let start = Instant::now();
    let (hyper, cell, tuned) = if grid.is_empty() {
        let hyper = config.untuned(learner);
        // scored for the cross-validated report only; nothing is selected
        let cell = cross_validate_samples(&hyper, &prepared.train, options, search_seed)?;
        (hyper, cell, false)
    } else {
        let result = grid_search_samples(&grid, &prepared.train, options, search_seed)?;
        write_grid(&layout, k, &result)?;
        let best = result.best_cell().clone();
        if let Some(err) = &best.error {
            return Err(CliError::Runtime(format!(
                "every {learner} grid cell failed for K = {k}: {err}"
            )));
        }
        (best.hyper.clone(), best, true)
    };
    let grid_seconds = if tuned { start.elapsed().as_secs_f64() } else { 0.0 };

    let matrix = prepared.train_matrix()?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot build a thread pool: {e}")))?;
    let (model, fit_seconds) =
        single.install(|| time_training(&matrix, &hyper, fit_seed(config.seed, k, learner)))?;

    let mut json = model.to_json()?;
    json.push('\n');
    write_text(&layout.learner_file(k, "models", learner, "json"), &json)?;
    write_json(
        &layout.learner_file(k, "cv", learner, "json"),
        &Selected {
            k,
            learner,
            tuned,
            folds: options.folds,
            cell,
        },
    )?;
    let timing = Timing {
        k,
        learner,
        hyper: hyper.label(),
        grid_seconds,
        fit_seconds,
        training_seconds: grid_seconds + fit_seconds,
    };
    write_json(&layout.learner_file(k, "timing", learner, "json"), &timing)?;
    println!(
        "train k={k} {learner}: {} (grid {:.2}s, fit {:.2}s)",
        timing.hyper, grid_seconds, fit_seconds
    );
    Ok(timing)
}

pub fn run(config: &RunConfig) -> CliResult<Vec<Timing>> {
    let layout = Layout::new(&config.output);
    let mut timings = Vec::new();
    for &k in &config.k_values {
        let prepared = Prepared::load(&layout, k)?;
        for &learner in &config.learners {
            timings.push(train_one(config, &prepared, k, learner)?);
        }
    }
    Ok(timings)
}
