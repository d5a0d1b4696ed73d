//! One human-readable summary of every artifact present, plus demand
//! histograms by day of week and by month. Missing artifacts are listed
//! rather than treated as errors. Wall-clock timings are referenced, never
//! inlined, so the report is reproducible byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use skyport_core::eval::GridResult;
use skyport_core::features::{DAY_NAMES, MONTH_NAMES};
use skyport_core::importance::ImportanceTable;
use skyport_core::ingest::{parse_trips, SyntheticManifest, TripRecord};
use skyport_core::{Demand, LearnerKind};

use crate::artifacts::{fixed, write_csv, write_json, write_text, Layout};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::stages::evaluate::{Baseline, MetricsFile};
use crate::stages::generate::manifest_path;
use crate::stages::importance::TopFeature;
use crate::stages::train::Selected;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub label: String,
    pub trips: u64,
    pub passengers: u64,
}

/// Trips and passengers per pickup day of week (Sunday first) and per
/// pickup month (January first).
pub fn demand_histograms(trips: &[TripRecord]) -> (Vec<HistogramBin>, Vec<HistogramBin>) {
    let bins = |names: &[&str]| -> Vec<HistogramBin> {
        names
            .iter()
            .map(|n| HistogramBin {
                label: n.to_string(),
                trips: 0,
                passengers: 0,
            })
            .collect()
    };
    let mut by_day = bins(&DAY_NAMES);
    let mut by_month = bins(&MONTH_NAMES);
    for t in trips {
        let date = t.pickup_at.date();
        for bin in [
            &mut by_day[date.weekday().num_days_from_sunday() as usize],
            &mut by_month[date.month0() as usize],
        ] {
            bin.trips += 1;
            bin.passengers += u64::from(t.passengers);
        }
    }
    (by_day, by_month)
}

/// Subset of the preparation log that the report reads back.
#[derive(Debug, Clone, Deserialize)]
struct LogView {
    samples: SamplesView,
    bins: BinsView,
    clusters: ClustersView,
    summary: Vec<SummaryView>,
}

#[derive(Debug, Clone, Deserialize)]
struct SamplesView {
    aggregated: usize,
    train: usize,
    test: usize,
    dropped: usize,
}

#[derive(Debug, Clone, Deserialize)]
struct BinsView {
    t_low: u64,
    t_high: u64,
}

#[derive(Debug, Clone, Deserialize)]
struct ClustersView {
    iterations_run: usize,
    wcss: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct SummaryView {
    group: String,
    column: String,
    count: usize,
    mean: Option<f64>,
}

struct Report {
    root: PathBuf,
    text: String,
    gaps: Vec<String>,
}

impl Report {
    /// `path` relative to the output root when it lies inside it, so the
    /// report does not depend on where the run was written.
    fn shown(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).display().to_string()
    }

    fn load<T: DeserializeOwned>(&mut self, path: &Path, what: &str) -> Option<T> {
        let parsed = std::fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok());
        if parsed.is_none() {
            let shown = self.shown(path);
            self.gaps.push(format!("{what}: `{shown}` not found or unreadable"));
        }
        parsed
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| fixed(v, 3)).unwrap_or_else(|| "-".into())
}

fn data_section(r: &mut Report, config: &RunConfig) {
    r.line("## Data\n");
    let (trips, weather) = (r.shown(&config.trips_path()), r.shown(&config.weather_path()));
    let _ = writeln!(r.text, "Trips: `{trips}`  ");
    let _ = writeln!(r.text, "Weather: `{weather}`\n");
    if let Some(m) = r.load::<SyntheticManifest>(&manifest_path(config), "synthetic manifest") {
        let _ = writeln!(
            r.text,
            "Synthetic data: {} trip rows ({} corrupted on purpose), {} weather hours \
             ({} with visibility removed), {} hotspots, {} to {}. Planted drivers: {}.\n",
            m.trips_written,
            m.corrupted_trips,
            m.weather_hours,
            m.missing_visibility,
            m.spec.hotspots.len(),
            m.spec.start_date,
            m.spec.end_date,
            m.planted_drivers.join(", ")
        );
    }
}

fn preparation_section(r: &mut Report, config: &RunConfig, layout: &Layout) {
    r.line("## Preparation\n");
    r.line("| K | samples | train | test | dropped | low ≤ | high > | k-means iterations | WCSS |");
    r.line("|---|---|---|---|---|---|---|---|---|");
    let mut logs = Vec::new();
    for &k in &config.k_values {
        if let Some(log) = r.load::<LogView>(&layout.k_file(k, "prepare_log.json"), "preparation log") {
            let _ = writeln!(
                r.text,
                "| {k} | {} | {} | {} | {} | {} | {} | {} | {} |",
                log.samples.aggregated,
                log.samples.train,
                log.samples.test,
                log.samples.dropped,
                log.bins.t_low,
                log.bins.t_high,
                log.clusters.iterations_run,
                fixed(log.clusters.wcss, 4)
            );
            logs.push((k, log));
        }
    }
    r.line("");
    if let Some((k, log)) = logs.iter().find(|(_, l)| !l.summary.is_empty()) {
        let mut groups: Vec<&str> = Vec::new();
        let mut columns: Vec<&str> = Vec::new();
        for s in &log.summary {
            if !groups.contains(&s.group.as_str()) {
                groups.push(&s.group);
            }
            if !columns.contains(&s.column.as_str()) {
                columns.push(&s.column);
            }
        }
        let _ = writeln!(
            r.text,
            "Column means of complete rows against rows with missing values (K = {k}; \
             per-K detail in `k{{K}}/prepare_log.csv`):\n"
        );
        let _ = writeln!(r.text, "| column | {} |", groups.join(" | "));
        let _ = writeln!(r.text, "|---|{}", "---|".repeat(groups.len()));
        for column in columns {
            let cells: Vec<String> = groups
                .iter()
                .map(|g| {
                    log.summary
                        .iter()
                        .find(|s| s.group == *g && s.column == column)
                        .map(|s| format!("{} (n={})", opt(s.mean), s.count))
                        .unwrap_or_else(|| "-".into())
                })
                .collect();
            let _ = writeln!(r.text, "| {column} | {} |", cells.join(" | "));
        }
        r.line("");
    }
}

fn selection_section(r: &mut Report, config: &RunConfig, layout: &Layout) {
    r.line("## Model selection\n");
    r.line("| K | learner | configuration | cells searched | mean CV macro-F1 |");
    r.line("|---|---|---|---|---|");
    for &k in &config.k_values {
        for &learner in &config.learners {
            let Some(sel) = r.load::<Selected>(&layout.learner_file(k, "cv", learner, "json"), "cross-validation result")
            else {
                continue;
            };
            let cells = if sel.tuned {
                r.load::<GridResult>(&layout.learner_file(k, "grid", learner, "json"), "grid result")
                    .map_or("-".to_string(), |g| g.cells.len().to_string())
            } else {
                "none (no parameters)".to_string()
            };
            let _ = writeln!(
                r.text,
                "| {k} | {} | {} | {cells} | {} |",
                learner.display_name(),
                sel.cell.label,
                fixed(sel.cell.mean_f1, 4)
            );
        }
    }
    r.line("");
}

fn performance_section(r: &mut Report, config: &RunConfig, layout: &Layout) {
    r.line("## Classification performance\n");
    let Some(metrics) = r.load::<MetricsFile>(&layout.file("metrics.json"), "metrics") else {
        r.line("_Not available: run `skyport evaluate`._\n");
        return;
    };
    let baselines: Vec<Baseline> = r.load(&layout.file("baseline.json"), "baseline").unwrap_or_default();
    r.line("Held-out test split; full table with cross-validated rows in `metrics.csv`.\n");
    for &k in &config.k_values {
        let _ = writeln!(r.text, "### K = {k}\n");
        r.line("| learner | class | precision | recall | F1 |");
        r.line("|---|---|---|---|---|");
        for &learner in &config.learners {
            let classes = Demand::ALL.iter().map(|d| d.as_str()).chain(["average"]);
            for class in classes {
                if let Some(row) = metrics.rows.iter().find(|m| {
                    m.k == k && m.learner == learner && m.evaluation == "test" && m.class == class
                }) {
                    let _ = writeln!(
                        r.text,
                        "| {} | {class} | {} | {} | {} |",
                        learner.display_name(),
                        fixed(row.precision, 4),
                        fixed(row.recall, 4),
                        fixed(row.f1, 4)
                    );
                }
            }
        }
        if let Some(b) = baselines.iter().find(|b| b.k == k) {
            let _ = writeln!(
                r.text,
                "\nMajority-class baseline ({}): accuracy {}, macro-F1 {}.",
                b.majority_class,
                fixed(b.test_accuracy, 4),
                fixed(b.test_macro_f1, 4)
            );
        }
        r.line("");
    }
}

fn timing_section(r: &mut Report, layout: &Layout) {
    r.line("## Training time\n");
    if layout.file("timing.csv").exists() {
        r.line(
            "Wall-clock times per (K, learner) are in `timing.csv` and `timing.json`: \
             `grid_seconds` for the cross-validated search, `fit_seconds` for the final \
             single-threaded fit and `training_seconds` for both together. They vary \
             between runs and are therefore kept out of this report.\n",
        );
    } else {
        r.gaps.push("timing: `timing.csv` not found".into());
        r.line("_Not available: run `skyport evaluate`._\n");
    }
}

fn importance_section(r: &mut Report, config: &RunConfig, layout: &Layout) {
    r.line("## Feature importance\n");
    let Some(top) = r.load::<Vec<TopFeature>>(&layout.file("top_features.json"), "top features") else {
        r.line("_Not available: run `skyport importance`._\n");
        return;
    };
    r.line("Mean increase in test classification error when a feature is shuffled.\n");
    for &k in &config.k_values {
        let mut learners: Vec<LearnerKind> = top.iter().filter(|t| t.k == k).map(|t| t.learner).collect();
        learners.dedup();
        for learner in learners {
            let _ = writeln!(r.text, "### K = {k}, {}\n", learner.display_name());
            r.line("| rank | feature | importance | std |");
            r.line("|---|---|---|---|");
            for t in top.iter().filter(|t| t.k == k && t.learner == learner) {
                let _ = writeln!(
                    r.text,
                    "| {} | {} | {} | {} |",
                    t.rank,
                    t.feature,
                    fixed(t.importance, 4),
                    fixed(t.std, 4)
                );
            }
            if let Some(table) = r.load::<ImportanceTable>(
                &layout.learner_file(k, "importance", learner, "json"),
                "importance table",
            ) {
                let _ = writeln!(
                    r.text,
                    "\nBaseline test error {} over {} repeats.",
                    fixed(table.baseline_error, 4),
                    table.repeats
                );
            }
            r.line("");
        }
    }
}

fn histogram_section(r: &mut Report, config: &RunConfig, layout: &Layout) -> CliResult<()> {
    r.line("## Demand variation\n");
    let Ok(file) = std::fs::File::open(config.trips_path()) else {
        let shown = r.shown(&config.trips_path());
        r.gaps.push(format!("histograms: `{shown}` not found"));
        r.line("_Not available: trip file missing._\n");
        return Ok(());
    };
    let (trips, _) = parse_trips(file)?;
    let (by_day, by_month) = demand_histograms(&trips);
    for (name, bins, title) in [
        ("demand_by_day_of_week", &by_day, "day of week"),
        ("demand_by_month", &by_month, "month"),
    ] {
        write_json(&layout.file(&format!("{name}.json")), bins)?;
        let rows: Vec<Vec<String>> = bins
            .iter()
            .map(|b| vec![b.label.clone(), b.trips.to_string(), b.passengers.to_string()])
            .collect();
        write_csv(&layout.file(&format!("{name}.csv")), &["label", "trips", "passengers"], &rows)?;
        let _ = writeln!(r.text, "Passengers by {title} (`{name}.csv`):\n");
        r.line("| | trips | passengers |");
        r.line("|---|---|---|");
        for b in bins.iter().filter(|b| b.trips > 0) {
            let _ = writeln!(r.text, "| {} | {} | {} |", b.label, b.trips, b.passengers);
        }
        r.line("");
    }
    Ok(())
}

pub fn run(config: &RunConfig) -> CliResult<Vec<String>> {
    let layout = Layout::new(&config.output);
    let mut r = Report {
        root: config.output.clone(),
        text: String::new(),
        gaps: Vec::new(),
    };
    r.line("# Air-taxi demand classification report\n");
    let _ = writeln!(
        r.text,
        "Master seed {}; K ∈ {{{}}}; learners: {}; {}-fold cross-validation; {:.0}/{:.0} split.\n",
        config.seed,
        config.k_values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        config.learners.iter().map(|l| l.display_name()).collect::<Vec<_>>().join(", "),
        config.cv.folds,
        100.0 * config.split_ratio,
        100.0 * (1.0 - config.split_ratio)
    );
    data_section(&mut r, config);
    preparation_section(&mut r, config, &layout);
    selection_section(&mut r, config, &layout);
    performance_section(&mut r, config, &layout);
    timing_section(&mut r, &layout);
    importance_section(&mut r, config, &layout);
    histogram_section(&mut r, config, &layout)?;
    r.line("## Gaps\n");
    if r.gaps.is_empty() {
        r.line("None: every artifact was found.");
    } else {
        for g in r.gaps.clone() {
            r.line(format!("- {g}"));
        }
    }
    write_text(&layout.file("report.md"), &r.text)?;
    println!("report: {} ({} gaps)", layout.file("report.md").display(), r.gaps.len());
    Ok(r.gaps)
}
