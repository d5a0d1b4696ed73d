use serde::Serialize;
use skyport_core::eval::split_indices;
use skyport_core::features::{
    aggregate_samples, apply_encoder, fit_bins, fit_encoder, join_weather, label_samples,
    write_samples, BinThresholds, Imputation, Imputer, Partition, Sample,
};
use skyport_core::geo::{kmeans_fit, KMeansParams};
use skyport_core::ingest::{parse_trips, parse_weather, TripRecord, ValidationReport, WeatherRecord};
use skyport_core::seed::derive_seed;

use crate::artifacts::{create, fixed, open, write_csv, write_json, Layout};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const HINT: &str = "run `skyport generate` or set data.trips / data.weather";

/// Descriptive statistics of one column over one group of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub group: String,
    pub column: String,
    pub count: usize,
    pub missing: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleCounts {
    pub aggregated: usize,
    pub train_before_cleaning: usize,
    pub test_before_cleaning: usize,
    pub train: usize,
    pub test: usize,
    pub dropped: usize,
    pub with_missing: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub seed: u64,
    pub iterations_run: usize,
    pub wcss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrepareLog {
    pub k: usize,
    pub imputation: Imputation,
    pub trips: ValidationReport,
    pub weather: ValidationReport,
    pub clusters: ClusterSummary,
    pub samples: SampleCounts,
    pub bins: BinThresholds,
    /// Training and test rows per class, `[low, moderate, high]`.
    pub train_classes: [usize; 3],
    pub test_classes: [usize; 3],
    /// Rows without missing values against rows with some; under listwise
    /// deletion these are the retained and the removed rows.
    pub summary: Vec<ColumnSummary>,
}

fn summarize(group: &str, column: &str, values: &[Option<f64>]) -> ColumnSummary {
    let observed: Vec<f64> = values.iter().flatten().copied().collect();
    let n = observed.len();
    let mean = (n > 0).then(|| observed.iter().sum::<f64>() / n as f64);
    let std = mean.filter(|_| n > 1).map(|m| {
        (observed.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    ColumnSummary {
        group: group.to_string(),
        column: column.to_string(),
        count: values.len(),
        missing: values.len() - n,
        mean,
        std,
        min: observed.iter().copied().reduce(f64::min),
        max: observed.iter().copied().reduce(f64::max),
    }
}

fn group_summary(group: &str, samples: &[&Sample]) -> Vec<ColumnSummary> {
    let column = |f: &dyn Fn(&Sample) -> Option<f64>| -> Vec<Option<f64>> {
        samples.iter().map(|s| f(s)).collect()
    };
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    vec![
        summarize(group, "passengers", &column(&|s| Some(s.passengers as f64))),
        summarize(group, "time_slot", &column(&|s| Some(s.time_slot as f64))),
        summarize(group, "weekday", &column(&|s| Some(flag(s.weekday)))),
        summarize(group, "temperature", &column(&|s| s.temperature)),
        summarize(group, "visibility", &column(&|s| s.visibility)),
        summarize(group, "wind_speed", &column(&|s| s.wind_speed)),
        summarize(group, "humidity", &column(&|s| s.humidity)),
        summarize(group, "fog", &column(&|s| s.fog.map(flag))),
        summarize(group, "condition_rain", &column(&|s| {
            s.condition.map(|c| flag(c == skyport_core::Condition::Rain))
        })),
    ]
}

fn retained_vs_removed(samples: &[Sample], strategy: Imputation) -> Vec<ColumnSummary> {
    let (complete, partial): (Vec<&Sample>, Vec<&Sample>) =
        samples.iter().partition(|s| !s.has_missing());
    let (kept, other) = match strategy {
        Imputation::Listwise => ("retained", "removed"),
        _ => ("complete", "imputed"),
    };
    let mut rows = group_summary(kept, &complete);
    rows.extend(group_summary(other, &partial));
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| fixed(v, 4)).unwrap_or_default()
}

fn write_log(layout: &Layout, log: &PrepareLog) -> CliResult<()> {
    write_json(&layout.k_file(log.k, "prepare_log.json"), log)?;
    let rows: Vec<Vec<String>> = log
        .summary
        .iter()
        .map(|c| {
            vec![
                c.group.clone(),
                c.column.clone(),
                c.count.to_string(),
                c.missing.to_string(),
                opt(c.mean),
                opt(c.std),
                opt(c.min),
                opt(c.max),
            ]
        })
        .collect();
    write_csv(
        &layout.k_file(log.k, "prepare_log.csv"),
        &["group", "column", "count", "missing", "mean", "std", "min", "max"],
        &rows,
    )
}

pub struct Inputs {
    pub trips: Vec<TripRecord>,
    pub trip_report: ValidationReport,
    pub weather: Vec<WeatherRecord>,
    pub weather_report: ValidationReport,
}

pub fn load_inputs(config: &RunConfig) -> CliResult<Inputs> {
    let (trips, trip_report) = parse_trips(open(&config.trips_path(), HINT)?)?;
    let (weather, weather_report) = parse_weather(open(&config.weather_path(), HINT)?)?;
    if trips.is_empty() {
        return Err(CliError::Runtime("no valid trips in the input".into()));
    }
    Ok(Inputs {
        trips,
        trip_report,
        weather,
        weather_report,
    })
}

pub fn prepare_k(config: &RunConfig, inputs: &Inputs, k: usize) -> CliResult<PrepareLog> {
    let layout = Layout::new(&config.output);
    let points: Vec<[f64; 2]> = inputs
        .trips
        .iter()
        .map(|t| [t.origin_lat, t.origin_lon])
        .collect();
    if k > points.len() {
        return Err(CliError::Config(format!(
            "K = {k} exceeds the {} valid trips",
            points.len()
        )));
    }
    let kmeans_seed = derive_seed(config.seed, &["kmeans", &k.to_string()]);
    let clusters = kmeans_fit(&points, KMeansParams::new(k, kmeans_seed))?;
    write_json(&layout.k_file(k, "clusters.json"), &clusters)?;

    let mut samples = aggregate_samples(&inputs.trips, &clusters)?;
    join_weather(&mut samples, &inputs.weather);
    let split_seed = derive_seed(config.seed, &["split", &k.to_string()]);
    let (train_idx, test_idx) = split_indices(samples.len(), config.split_ratio, split_seed)?;
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(CliError::Runtime(format!(
            "{} samples are too few for a train/test split",
            samples.len()
        )));
    }
    let pick = |idx: &[usize]| -> Vec<Sample> { idx.iter().map(|&i| samples[i].clone()).collect() };
    let (train_raw, test_raw) = (pick(&train_idx), pick(&test_idx));

    let imputer = Imputer::fit(&train_raw, config.imputation)?;
    let mut train = imputer.apply(train_raw)?;
    let mut test = imputer.apply(test_raw)?;
    let counts: Vec<u64> = train.iter().map(|s| s.passengers).collect();
    let bins = fit_bins(&counts)?;
    label_samples(&mut train, &bins);
    label_samples(&mut test, &bins);
    let encoder = fit_encoder(&train)?;

    let mut partitions = vec![Partition::Train; train.len()];
    partitions.extend(vec![Partition::Test; test.len()]);
    let all: Vec<Sample> = train.iter().chain(&test).cloned().collect();
    write_samples(create(&layout.k_file(k, "samples.csv"))?, &all, &partitions)?;
    write_json(&layout.k_file(k, "bins.json"), &bins)?;
    write_json(&layout.k_file(k, "encoder.json"), &encoder)?;
    write_json(&layout.k_file(k, "imputer.json"), &imputer)?;

    let train_classes = apply_encoder(&encoder, &train)?.class_counts();
    let test_classes = apply_encoder(&encoder, &test)?.class_counts();
    let log = PrepareLog {
        k,
        imputation: config.imputation,
        trips: inputs.trip_report.clone(),
        weather: inputs.weather_report.clone(),
        clusters: ClusterSummary {
            seed: kmeans_seed,
            iterations_run: clusters.iterations_run,
            wcss: clusters.wcss,
        },
        samples: SampleCounts {
            aggregated: samples.len(),
            train_before_cleaning: train_idx.len(),
            test_before_cleaning: test_idx.len(),
            train: train.len(),
            test: test.len(),
            dropped: samples.len() - train.len() - test.len(),
            with_missing: samples.iter().filter(|s| s.has_missing()).count(),
        },
        bins,
        train_classes,
        test_classes,
        summary: retained_vs_removed(&samples, config.imputation),
    };
    write_log(&layout, &log)?;
    println!(
        "prepare k={k}: {} samples, {} train / {} test after cleaning ({} dropped), {} columns",
        log.samples.aggregated,
        log.samples.train,
        log.samples.test,
        log.samples.dropped,
        encoder.n_columns()
    );
    Ok(log)
}

pub fn run(config: &RunConfig) -> CliResult<Vec<PrepareLog>> {
    let inputs = load_inputs(config)?;
    config
        .k_values
        .iter()
        .map(|&k| prepare_k(config, &inputs, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use skyport_core::features::derive_temporal;

    fn sample(passengers: u64, temperature: Option<f64>) -> Sample {
        let t = NaiveDate::from_ymd_opt(2015, 4, 1)
            .unwrap()
            .and_hms_opt(8, 0, 0)
            .unwrap();
        let mut s = Sample::new(1, derive_temporal(&t), passengers);
        s.temperature = temperature;
        s.visibility = Some(10.0);
        s.wind_speed = Some(3.0);
        s.humidity = Some(50.0);
        s.condition = Some(skyport_core::Condition::Normal);
        s.fog = Some(false);
        s
    }

    #[test]
    fn summary_splits_complete_and_incomplete_rows() {
        let samples = vec![sample(2, Some(10.0)), sample(4, Some(20.0)), sample(9, None)];
        let rows = retained_vs_removed(&samples, Imputation::Listwise);
        let find = |g: &str, c: &str| rows.iter().find(|r| r.group == g && r.column == c).unwrap();
        let kept = find("retained", "passengers");
        assert_eq!((kept.count, kept.mean), (2, Some(3.0)));
        let temp = find("removed", "temperature");
        assert_eq!((temp.count, temp.missing, temp.mean), (1, 1, None));
        assert_eq!(find("removed", "passengers").mean, Some(9.0));
        let rows = retained_vs_removed(&samples, Imputation::MedianMode);
        assert!(rows.iter().any(|r| r.group == "imputed"));
    }

    #[test]
    fn summary_statistics() {
        let s = summarize("g", "c", &[Some(1.0), None, Some(3.0)]);
        assert_eq!(s.count, 3);
        assert_eq!(s.missing, 1);
        assert_eq!(s.mean, Some(2.0));
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!((s.min, s.max), (Some(1.0), Some(3.0)));
        let empty = summarize("g", "c", &[]);
        assert_eq!((empty.mean, empty.std, empty.min), (None, None, None));
    }
}
