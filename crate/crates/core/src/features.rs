//! From trips and weather to an encoded design matrix.
//!
//! Trips are grouped into `(location, date, hour)` cells, labelled by binning
//! the summed passenger count, joined with the hourly weather, cleaned, and
//! finally one-hot encoded and standardized.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{assign_location, ClusterModel};
use crate::ingest::{Condition, TripRecord, WeatherRecord};

pub const MONTH_NAMES: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
pub const DAY_NAMES: [&str; 7] = ["Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"];

/// Demand level of one `(location, date, hour)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Demand {
    Low,
    Moderate,
    High,
}

impl Demand {
    pub const ALL: [Demand; 3] = [Demand::Low, Demand::Moderate, Demand::High];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Demand {
        Demand::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Demand::Low => "low",
            Demand::Moderate => "moderate",
            Demand::High => "high",
        }
    }
}

impl fmt::Display for Demand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Demand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Demand::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::argument(format!("unknown demand level {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Temporal {
    pub date: NaiveDate,
    /// 1 = January.
    pub month: u32,
    /// 0 = Sunday.
    pub day_of_week: u32,
    pub weekday: bool,
    /// Slot `t` covers local hours `[t-1, t)`.
    pub time_slot: u32,
}

pub fn derive_temporal(ts: &NaiveDateTime) -> Temporal {
    let date = ts.date();
    let day = date.weekday();
    Temporal {
        date,
        month: date.month(),
        day_of_week: day.num_days_from_sunday(),
        weekday: !matches!(day, Weekday::Sat | Weekday::Sun),
        time_slot: ts.hour() + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub location_id: u32,
    pub date: NaiveDate,
    pub time_slot: u32,
    pub month: u32,
    pub day_of_week: u32,
    pub weekday: bool,
    pub temperature: Option<f64>,
    pub visibility: Option<f64>,
    pub wind_speed: Option<f64>,
    pub humidity: Option<f64>,
    pub condition: Option<Condition>,
    pub fog: Option<bool>,
    pub passengers: u64,
    pub demand: Option<Demand>,
}

/// Continuous weather columns in declaration order.
pub const CONTINUOUS: [&str; 4] = ["temperature", "visibility", "wind_speed", "humidity"];

impl Sample {
    pub fn new(location_id: u32, temporal: Temporal, passengers: u64) -> Self {
        Sample {
            location_id,
            date: temporal.date,
            time_slot: temporal.time_slot,
            month: temporal.month,
            day_of_week: temporal.day_of_week,
            weekday: temporal.weekday,
            temperature: None,
            visibility: None,
            wind_speed: None,
            humidity: None,
            condition: None,
            fog: None,
            passengers,
            demand: None,
        }
    }

    /// Start of the hour this sample covers.
    pub fn hour_start(&self) -> NaiveDateTime {
        NaiveDateTime::new(self.date, NaiveTime::MIN) + Duration::hours(self.time_slot as i64 - 1)
    }

    pub fn continuous(&self, i: usize) -> Option<f64> {
        match i {
            0 => self.temperature,
            1 => self.visibility,
            2 => self.wind_speed,
            3 => self.humidity,
            _ => unreachable!("continuous feature index {i}"),
        }
    }

    fn continuous_mut(&mut self, i: usize) -> &mut Option<f64> {
        match i {
            0 => &mut self.temperature,
            1 => &mut self.visibility,
            2 => &mut self.wind_speed,
            3 => &mut self.humidity,
            _ => unreachable!("continuous feature index {i}"),
        }
    }

    pub fn has_missing(&self) -> bool {
        (0..4).any(|i| self.continuous(i).is_none()) || self.condition.is_none() || self.fog.is_none()
    }
}

/// Group trips into one sample per observed `(location, date, slot)` cell.
pub fn aggregate_samples(trips: &[TripRecord], model: &ClusterModel) -> Result<Vec<Sample>> {
    let mut cells: BTreeMap<(NaiveDate, u32, u32), u64> = BTreeMap::new();
    for trip in trips {
        let location = assign_location([trip.origin_lat, trip.origin_lon], model)?;
        let t = derive_temporal(&trip.pickup_at);
        *cells.entry((t.date, t.time_slot, location)).or_default() += trip.passengers as u64;
    }
    Ok(cells
        .into_iter()
        .map(|((date, slot, location), passengers)| {
            let hour = NaiveDateTime::new(date, NaiveTime::MIN) + Duration::hours(slot as i64 - 1);
            Sample::new(location, derive_temporal(&hour), passengers)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinThresholds {
    pub t_low: u64,
    pub t_high: u64,
}

/// Tertile thresholds of the training counts by the nearest-rank rule.
pub fn fit_bins(counts: &[u64]) -> Result<BinThresholds> {
    if counts.is_empty() {
        return Err(Error::argument("cannot fit demand bins on no counts"));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // ranks ceil(n/3) and ceil(2n/3), 1-based
    let low_rank = n.div_ceil(3);
    let high_rank = (2 * n).div_ceil(3);
    Ok(BinThresholds {
        t_low: sorted[low_rank - 1],
        t_high: sorted[high_rank - 1],
    })
}

pub fn bin_demand(passengers: u64, thresholds: &BinThresholds) -> Demand {
    if passengers <= thresholds.t_low {
        Demand::Low
    } else if passengers > thresholds.t_high {
        Demand::High
    } else {
        Demand::Moderate
    }
}

pub fn label_samples(samples: &mut [Sample], thresholds: &BinThresholds) {
    for s in samples {
        s.demand = Some(bin_demand(s.passengers, thresholds));
    }
}

/// Copy the matching hourly observation into each sample; samples without
/// one get every weather field missing.
pub fn join_weather(samples: &mut [Sample], weather: &[WeatherRecord]) {
    let by_hour: HashMap<NaiveDateTime, &WeatherRecord> =
        weather.iter().map(|w| (w.observed_at, w)).collect();
    for s in samples {
        match by_hour.get(&s.hour_start()) {
            Some(w) => {
                s.temperature = w.temperature;
                s.visibility = w.visibility;
                s.wind_speed = w.wind_speed;
                s.humidity = w.humidity;
                s.condition = w.condition;
                s.fog = w.fog;
            }
            None => {
                s.temperature = None;
                s.visibility = None;
                s.wind_speed = None;
                s.humidity = None;
                s.condition = None;
                s.fog = None;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    #[default]
    Listwise,
    MedianMode,
    Regression,
}

impl FromStr for Imputation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "listwise" => Ok(Imputation::Listwise),
            "median_mode" => Ok(Imputation::MedianMode),
            "regression" => Ok(Imputation::Regression),
            other => Err(Error::argument(format!("unknown imputation strategy {other:?}"))),
        }
    }
}

/// Missing-value handling fitted on training samples and reusable on others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub strategy: Imputation,
    pub medians: [f64; 4],
    pub condition_mode: Condition,
    pub fog_mode: bool,
    /// Least-squares coefficients per continuous column (regression only).
    pub regressions: Vec<Vec<f64>>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Most frequent level; ties go to the earliest level.
fn mode<T: Copy + PartialEq>(levels: &[T], observed: impl Iterator<Item = T>) -> T {
    let mut counts = vec![0usize; levels.len()];
    for v in observed {
        if let Some(i) = levels.iter().position(|l| *l == v) {
            counts[i] += 1;
        }
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    levels[best]
}

impl Imputer {
    fn regression_inputs(s: &Sample, target: usize, medians: &[f64; 4]) -> Vec<f64> {
        let mut x = vec![
            1.0,
            s.time_slot as f64,
            s.month as f64,
            f64::from(u8::from(s.weekday)),
        ];
        for j in (0..4).filter(|&j| j != target) {
            x.push(s.continuous(j).unwrap_or(medians[j]));
        }
        x
    }

    pub fn fit(train: &[Sample], strategy: Imputation) -> Result<Imputer> {
        let complete: Vec<&Sample> = train.iter().filter(|s| !s.has_missing()).collect();
        if strategy != Imputation::Listwise && complete.is_empty() {
            return Err(Error::argument(
                "imputation needs at least one fully observed sample",
            ));
        }
        let mut medians = [0.0; 4];
        for (i, m) in medians.iter_mut().enumerate() {
            let mut observed: Vec<f64> = train.iter().filter_map(|s| s.continuous(i)).collect();
            if !observed.is_empty() {
                *m = median(&mut observed);
            }
        }
        let condition_mode = mode(&Condition::ALL, train.iter().filter_map(|s| s.condition));
        let fog_mode = mode(&[false, true], train.iter().filter_map(|s| s.fog));

        let mut regressions = Vec::new();
        if strategy == Imputation::Regression {
            for target in 0..4 {
                let rows: Vec<Vec<f64>> = complete
                    .iter()
                    .map(|s| Self::regression_inputs(s, target, &medians))
                    .collect();
                let p = rows[0].len();
                let design = DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c]);
                let y = DVector::from_iterator(
                    complete.len(),
                    complete.iter().map(|s| s.continuous(target).unwrap()),
                );
                let coef = design
                    .svd(true, true)
                    .solve(&y, 1e-10)
                    .map_err(|e| Error::argument(format!("regression imputation failed: {e}")))?;
                regressions.push(coef.iter().copied().collect());
            }
        }
        Ok(Imputer {
            strategy,
            medians,
            condition_mode,
            fog_mode,
            regressions,
        })
    }

    pub fn apply(&self, samples: Vec<Sample>) -> Result<Vec<Sample>> {
        if self.strategy == Imputation::Listwise {
            let kept: Vec<Sample> = samples.into_iter().filter(|s| !s.has_missing()).collect();
            if kept.is_empty() {
                return Err(Error::EmptyDataset(
                    "listwise deletion removed every row".into(),
                ));
            }
            return Ok(kept);
        }
        let mut out = samples;
        for s in &mut out {
            let before = s.clone();
            for i in 0..4 {
                if before.continuous(i).is_some() {
                    continue;
                }
                let value = match self.strategy {
                    Imputation::Regression => {
                        let x = Self::regression_inputs(&before, i, &self.medians);
                        x.iter().zip(&self.regressions[i]).map(|(a, b)| a * b).sum()
                    }
                    _ => self.medians[i],
                };
                *s.continuous_mut(i) = Some(value);
            }
            s.condition.get_or_insert(self.condition_mode);
            s.fog.get_or_insert(self.fog_mode);
        }
        Ok(out)
    }
}

/// Fit the strategy on `samples` and apply it to them.
pub fn clean(samples: Vec<Sample>, strategy: Imputation) -> Result<Vec<Sample>> {
    let imputer = Imputer::fit(&samples, strategy)?;
    imputer.apply(samples)
}

/// A contiguous block of encoded columns belonging to one source feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl FeatureGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Fitted one-hot vocabulary and standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    /// Location IDs observed in training, ascending.
    pub location_levels: Vec<u32>,
    /// Mean and sample standard deviation per continuous feature.
    pub means: [f64; 4],
    pub stds: [f64; 4],
    pub column_names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
}

#[derive(Debug, Clone, Copy)]
enum Feature {
    Month,
    DayOfWeek,
    TimeSlot,
    Weekday,
    Location,
    Continuous(usize),
    Condition,
    Fog,
}

/// Declaration order of the encoded features.
const FEATURE_ORDER: [(Feature, &str); 11] = [
    (Feature::Month, "Month"),
    (Feature::DayOfWeek, "DayOfWeek"),
    (Feature::TimeSlot, "TimeSlot"),
    (Feature::Weekday, "Weekday"),
    (Feature::Location, "LocationID"),
    (Feature::Continuous(0), "Temperature"),
    (Feature::Condition, "Condition"),
    (Feature::Continuous(1), "Visibility"),
    (Feature::Continuous(2), "WindSpeed"),
    (Feature::Continuous(3), "Humidity"),
    (Feature::Fog, "Fog"),
];

const YES_NO: [&str; 2] = ["Yes", "No"];

fn level_names(feature: Feature, locations: &[u32]) -> Option<Vec<String>> {
    let names = match feature {
        Feature::Month => MONTH_NAMES.iter().map(|m| m.to_string()).collect(),
        Feature::DayOfWeek => DAY_NAMES.iter().map(|d| d.to_string()).collect(),
        Feature::TimeSlot => (1..=24).map(|t| t.to_string()).collect(),
        Feature::Weekday | Feature::Fog => YES_NO.iter().map(|s| s.to_string()).collect(),
        Feature::Location => locations.iter().map(|l| l.to_string()).collect(),
        Feature::Condition => Condition::ALL.iter().map(|c| c.to_string()).collect(),
        Feature::Continuous(_) => return None,
    };
    Some(names)
}

fn require_complete(samples: &[Sample]) -> Result<()> {
    if samples.iter().any(Sample::has_missing) {
        return Err(Error::argument("samples must be cleaned before encoding"));
    }
    Ok(())
}

pub fn fit_encoder(train: &[Sample]) -> Result<Encoder> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("no training samples to fit the encoder".into()));
    }
    require_complete(train)?;
    let mut location_levels: Vec<u32> = train.iter().map(|s| s.location_id).collect();
    location_levels.sort_unstable();
    location_levels.dedup();

    let n = train.len() as f64;
    let mut means = [0.0; 4];
    let mut stds = [0.0; 4];
    for i in 0..4 {
        let mean = train.iter().map(|s| s.continuous(i).unwrap()).sum::<f64>() / n;
        let ss: f64 = train
            .iter()
            .map(|s| (s.continuous(i).unwrap() - mean).powi(2))
            .sum();
        means[i] = mean;
        stds[i] = if train.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    }

    let mut column_names = Vec::new();
    let mut groups = Vec::new();
    for (feature, name) in FEATURE_ORDER {
        let start = column_names.len();
        match level_names(feature, &location_levels) {
            Some(levels) => column_names.extend(levels.iter().map(|l| format!("{name}_{l}"))),
            None => column_names.push(name.to_string()),
        }
        groups.push(FeatureGroup {
            name: name.to_string(),
            start,
            len: column_names.len() - start,
        });
    }
    Ok(Encoder {
        location_levels,
        means,
        stds,
        column_names,
        groups,
    })
}

impl Encoder {
    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    /// Write the encoded form of `s` into `out` (length [`Self::n_columns`]).
    pub fn encode_into(&self, s: &Sample, out: &mut [f64]) {
        out.fill(0.0);
        for (group, (feature, _)) in self.groups.iter().zip(FEATURE_ORDER) {
            let hot = match feature {
                Feature::Month => Some(s.month as usize - 1),
                Feature::DayOfWeek => Some(s.day_of_week as usize),
                Feature::TimeSlot => Some(s.time_slot as usize - 1),
                Feature::Weekday => Some(if s.weekday { 0 } else { 1 }),
                Feature::Location => self.location_levels.iter().position(|&l| l == s.location_id),
                Feature::Condition => s.condition.map(Condition::index),
                Feature::Fog => s.fog.map(|f| if f { 0 } else { 1 }),
                Feature::Continuous(i) => {
                    let x = s.continuous(i).unwrap_or(self.means[i]) - self.means[i];
                    out[group.start] = if self.stds[i] > 0.0 { x / self.stds[i] } else { x };
                    continue;
                }
            };
            // unseen levels leave an all-zero block
            if let Some(level) = hot.filter(|&l| l < group.len) {
                out[group.start + level] = 1.0;
            }
        }
    }
}

pub fn apply_encoder(encoder: &Encoder, samples: &[Sample]) -> Result<FeatureMatrix> {
    require_complete(samples)?;
    let n_cols = encoder.n_columns();
    let mut values = vec![0.0; samples.len() * n_cols];
    let mut labels = Vec::with_capacity(samples.len());
    for (s, row) in samples.iter().zip(values.chunks_mut(n_cols.max(1))) {
        encoder.encode_into(s, row);
        labels.push(
            s.demand
                .ok_or_else(|| Error::argument("sample has no demand label"))?,
        );
    }
    FeatureMatrix::new(
        values,
        labels,
        encoder.column_names.clone(),
        encoder.groups.clone(),
    )
}

/// Everything fitted on a training set of cleaned samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub bins: BinThresholds,
    pub encoder: Encoder,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

/// Fit demand bins and the encoder on `train` only, then label and encode
/// both `train` and `test` with them.
pub fn encode_split(train: &[Sample], test: &[Sample]) -> Result<Encoded> {
    let counts: Vec<u64> = train.iter().map(|s| s.passengers).collect();
    let bins = fit_bins(&counts)?;
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    label_samples(&mut train, &bins);
    label_samples(&mut test, &bins);
    let encoder = fit_encoder(&train)?;
    Ok(Encoded {
        bins,
        train: apply_encoder(&encoder, &train)?,
        test: apply_encoder(&encoder, &test)?,
        encoder,
    })
}

/// Dense row-major design matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    labels: Vec<Demand>,
    column_names: Vec<String>,
    groups: Vec<FeatureGroup>,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f64>,
        labels: Vec<Demand>,
        column_names: Vec<String>,
        groups: Vec<FeatureGroup>,
    ) -> Result<Self> {
        let n_cols = column_names.len();
        let n_rows = labels.len();
        if values.len() != n_rows * n_cols {
            return Err(Error::argument(format!(
                "matrix has {} values, expected {n_rows} x {n_cols}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("matrix contains non-finite values"));
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            values,
            labels,
            column_names,
            groups,
        })
    }

    /// Matrix with generic column names and one group per column.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Demand>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::argument("ragged rows"));
        }
        let names: Vec<String> = (0..n_cols).map(|j| format!("x{j}")).collect();
        let groups = names
            .iter()
            .enumerate()
            .map(|(j, n)| FeatureGroup {
                name: n.clone(),
                start: j,
                len: 1,
            })
            .collect();
        FeatureMatrix::new(rows.concat(), labels, names, groups)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[Demand] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i].index()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            column_names: self.column_names.clone(),
            groups: self.groups.clone(),
        }
    }
}

/// Which side of the train/test split a prepared sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
        }
    }
}

pub const SAMPLE_HEADER: [&str; 15] = [
    "location_id",
    "date",
    "time_slot",
    "month",
    "day_of_week",
    "weekday",
    "temperature",
    "condition",
    "visibility",
    "wind_speed",
    "humidity",
    "fog",
    "passengers",
    "demand",
    "split",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_samples<W: Write>(
    sink: W,
    samples: &[Sample],
    partitions: &[Partition],
) -> Result<()> {
    if partitions.len() != samples.len() {
        return Err(Error::argument("one partition tag per sample is required"));
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SAMPLE_HEADER)?;
    for (s, p) in samples.iter().zip(partitions) {
        w.write_record([
            s.location_id.to_string(),
            s.date.format("%Y-%m-%d").to_string(),
            s.time_slot.to_string(),
            MONTH_NAMES[s.month as usize - 1].to_string(),
            DAY_NAMES[s.day_of_week as usize].to_string(),
            u8::from(s.weekday).to_string(),
            opt(s.temperature),
            opt(s.condition),
            opt(s.visibility),
            opt(s.wind_speed),
            opt(s.humidity),
            opt(s.fog.map(u8::from)),
            s.passengers.to_string(),
            opt(s.demand),
            p.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(source: R) -> Result<(Vec<Sample>, Vec<Partition>)> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SAMPLE_HEADER.iter().copied()) {
        return Err(Error::format("prepared dataset header does not match"));
    }
    let mut samples = Vec::new();
    let mut parts = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::format(format!("prepared dataset row {}: bad {what}", line + 1));
        let real = |i: usize| -> Result<Option<f64>> {
            match row[i].trim() {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(SAMPLE_HEADER[i])),
            }
        };
        let flag = |i: usize| -> Result<Option<bool>> {
            match row[i].trim() {
                "" => Ok(None),
                "1" => Ok(Some(true)),
                "0" => Ok(Some(false)),
                _ => Err(bad(SAMPLE_HEADER[i])),
            }
        };
        let date = NaiveDate::parse_from_str(&row[1], "%Y-%m-%d").map_err(|_| bad("date"))?;
        let time_slot: u32 = row[2].parse().map_err(|_| bad("time_slot"))?;
        if !(1..=24).contains(&time_slot) {
            return Err(bad("time_slot"));
        }
        let hour = NaiveDateTime::new(date, NaiveTime::MIN) + Duration::hours(time_slot as i64 - 1);
        let mut s = Sample::new(
            row[0].parse().map_err(|_| bad("location_id"))?,
            derive_temporal(&hour),
            row[12].parse().map_err(|_| bad("passengers"))?,
        );
        if MONTH_NAMES[s.month as usize - 1] != &row[3] || DAY_NAMES[s.day_of_week as usize] != &row[4]
        {
            return Err(bad("calendar fields"));
        }
        s.temperature = real(6)?;
        s.condition = match row[7].trim() {
            "" => None,
            c => Some(c.parse().map_err(|_| bad("condition"))?),
        };
        s.visibility = real(8)?;
        s.wind_speed = real(9)?;
        s.humidity = real(10)?;
        s.fog = flag(11)?;
        s.demand = match row[13].trim() {
            "" => None,
            d => Some(d.parse().map_err(|_| bad("demand"))?),
        };
        parts.push(match row[14].trim() {
            "train" => Partition::Train,
            "test" => Partition::Test,
            _ => return Err(bad("split")),
        });
        samples.push(s);
    }
    Ok((samples, parts))
}
