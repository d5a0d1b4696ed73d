//! Synthetic trip and weather generation with planted demand signals.
//!
//! Trips are drawn from a multinomial over `(date, hour, hotspot)` cells
//! whose weights multiply the hotspot intensity, a weekday multiplier, an
//! hour-of-day profile (rotated per hotspot by `peak_shift`) and a
//! suppression factor for rainy hours. Pickup coordinates scatter
//! isotropically around the hotspot center.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{Condition, TripRecord, WeatherRecord};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub lat: f64,
    pub lon: f64,
    /// Standard deviation of pickup scatter, in degrees.
    pub spread: f64,
    /// Relative trip intensity.
    pub intensity: f64,
    /// Hours by which this hotspot's demand profile is rotated.
    #[serde(default)]
    pub peak_shift: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub trips: usize,
    pub start_date: NaiveDate,
    /// Inclusive.
    pub end_date: NaiveDate,
    pub hotspots: Vec<Hotspot>,
    pub weekday_multiplier: f64,
    /// 24 non-negative intensities, index = hour of day.
    pub hour_profile: Vec<f64>,
    /// Intensity multiplier for hours with rain or thunderstorms.
    pub rain_suppression: f64,
    /// Probability that a trip row is corrupted or a visibility reading lost.
    pub missing_rate: f64,
}

/// Evening-peaked profile: quiet nights, a morning shoulder, peak at 4-6 PM.
pub const EVENING_PEAK_PROFILE: [f64; 24] = [
    0.2, 0.1, 0.1, 0.1, 0.1, 0.2, 0.5, 0.9, 1.1, 1.0, 0.9, 0.9, 1.0, 1.0, 1.1, 1.4, 2.6, 3.0, 2.8,
    1.8, 1.3, 1.1, 0.8, 0.4,
];

impl Default for SyntheticSpec {
    fn default() -> Self {
        let hotspot = |lat, lon, spread, intensity, peak_shift| Hotspot {
            lat,
            lon,
            spread,
            intensity,
            peak_shift,
        };
        SyntheticSpec {
            trips: 50_000,
            // nine whole weeks, Monday to Sunday
            start_date: NaiveDate::from_ymd_opt(2015, 3, 30).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2015, 5, 31).unwrap(),
            hotspots: vec![
                hotspot(40.6413, -73.7781, 0.012, 3.0, 0),
                hotspot(40.7549, -73.9840, 0.010, 2.0, 12),
                hotspot(40.6928, -73.9903, 0.010, 1.2, 6),
                hotspot(40.8448, -73.8648, 0.012, 0.8, -6),
                hotspot(40.7769, -73.8740, 0.008, 1.5, 9),
            ],
            weekday_multiplier: 2.0,
            hour_profile: EVENING_PEAK_PROFILE.to_vec(),
            rain_suppression: 0.5,
            missing_rate: 0.01,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Spec(msg.to_string()));
        if self.end_date < self.start_date {
            return bad("empty date range");
        }
        if self.hotspots.is_empty() {
            return bad("at least one hotspot is required");
        }
        if self.trips == 0 {
            return bad("trip count must be positive");
        }
        if self.hour_profile.len() != 24 {
            return bad("hour profile must have 24 entries");
        }
        if self.hour_profile.iter().any(|v| !v.is_finite() || *v < 0.0)
            || self.hour_profile.iter().all(|v| *v == 0.0)
        {
            return bad("hour profile must be non-negative and not all zero");
        }
        for h in &self.hotspots {
            if !(h.intensity.is_finite() && h.intensity > 0.0) {
                return bad("hotspot intensity must be positive");
            }
            if !(h.spread.is_finite() && h.spread >= 0.0) {
                return bad("hotspot spread must be non-negative");
            }
            if !(-90.0..=90.0).contains(&h.lat) || !(-180.0..=180.0).contains(&h.lon) {
                return bad("hotspot center out of coordinate range");
            }
        }
        if !(self.weekday_multiplier.is_finite() && self.weekday_multiplier > 0.0) {
            return bad("weekday multiplier must be positive");
        }
        if !(self.rain_suppression.is_finite() && self.rain_suppression >= 0.0) {
            return bad("rain suppression must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return bad("missing rate must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        (self.end_date - self.start_date).num_days() as usize + 1
    }
}

/// Sidecar describing what was planted, for recovery checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub seed: u64,
    pub spec: SyntheticSpec,
    pub trips_written: usize,
    pub corrupted_trips: usize,
    pub weather_hours: usize,
    pub missing_visibility: usize,
    /// Sample-level features whose values drive the planted intensity.
    pub planted_drivers: Vec<String>,
    /// Valid trips per day of week, Sunday first.
    pub trips_by_day_of_week: [usize; 7],
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub trips: Vec<TripRecord>,
    pub weather: Vec<WeatherRecord>,
    pub manifest: SyntheticManifest,
}

fn is_weekday(day: Weekday) -> bool {
    !matches!(day, Weekday::Sat | Weekday::Sun)
}

fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

const MONTHLY_MEAN_TEMPERATURE: [f64; 12] =
    [0.0, 1.0, 5.0, 11.0, 17.0, 22.0, 25.0, 24.0, 20.0, 14.0, 8.0, 3.0];

fn generate_weather(spec: &SyntheticSpec, rng: &mut Rng) -> Vec<WeatherRecord> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let start = NaiveDateTime::new(spec.start_date, NaiveTime::MIN);
    let hours = spec.days() * 24;
    let mut records = Vec::with_capacity(hours);
    let mut condition = Condition::Normal;
    let mut drift = 0.0;

    for i in 0..hours {
        let observed_at = start + Duration::hours(i as i64);
        let hour = (i % 24) as f64;
        let month = observed_at.date().month0() as usize;
        drift = 0.9 * drift + 0.6 * noise.sample(rng);
        let temperature = MONTHLY_MEAN_TEMPERATURE[month]
            + 4.0 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin()
            + drift;

        let u: f64 = rng.random();
        condition = match condition {
            Condition::Normal if u < 0.005 && temperature > 15.0 => Condition::Thunderstorm,
            Condition::Normal if u < 0.035 && temperature < 1.0 => Condition::Snow,
            Condition::Normal if u < 0.035 => Condition::Rain,
            Condition::Normal => Condition::Normal,
            Condition::Thunderstorm if u < 0.5 => Condition::Thunderstorm,
            Condition::Thunderstorm => Condition::Rain,
            other if u < 0.85 => other,
            _ => Condition::Normal,
        };

        let mut visibility = match condition {
            Condition::Normal if rng.random::<f64>() < 0.9 => 10.0,
            Condition::Normal => rng.random_range(5.0..10.0),
            Condition::Rain => rng.random_range(2.0..8.0),
            Condition::Snow => rng.random_range(0.5..4.0),
            Condition::Thunderstorm => rng.random_range(1.0..5.0),
        };
        if (4.0..9.0).contains(&hour) && rng.random::<f64>() < 0.05 {
            visibility = rng.random_range(0.2..0.9);
        }
        let visibility = round_to(visibility, 1);
        let mut wind = (12.0 + 5.0 * noise.sample(rng)).abs();
        if condition == Condition::Thunderstorm {
            wind += 10.0;
        }
        let humidity: f64 = match condition {
            Condition::Normal => rng.random_range(35.0..75.0),
            Condition::Rain | Condition::Thunderstorm => rng.random_range(80.0..100.0),
            Condition::Snow => rng.random_range(70.0..95.0),
        };
        let lost = rng.random::<f64>() < spec.missing_rate;

        records.push(WeatherRecord {
            observed_at,
            temperature: Some(round_to(temperature, 1)),
            condition: Some(condition),
            visibility: (!lost).then_some(visibility),
            wind_speed: Some(round_to(wind, 1)),
            humidity: Some(humidity.round()),
            fog: Some(visibility < 1.0),
        });
    }
    records
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut weather_rng = rng_from(derive_seed(seed, &["synthetic", "weather"]));
    let mut trip_rng = rng_from(derive_seed(seed, &["synthetic", "trips"]));
    let weather = generate_weather(spec, &mut weather_rng);

    let n_spots = spec.hotspots.len();
    let mut weights = Vec::with_capacity(weather.len() * n_spots);
    for record in &weather {
        let day = record.observed_at.date().weekday();
        let hour = record.observed_at.hour();
        let day_factor = if is_weekday(day) {
            spec.weekday_multiplier
        } else {
            1.0
        };
        let wet = matches!(
            record.condition,
            Some(Condition::Rain | Condition::Thunderstorm)
        );
        let weather_factor = if wet { spec.rain_suppression } else { 1.0 };
        for spot in &spec.hotspots {
            let profile_hour = (hour as i32 - spot.peak_shift).rem_euclid(24) as usize;
            weights.push(spot.intensity * day_factor * weather_factor * spec.hour_profile[profile_hour]);
        }
    }
    let cells = WeightedIndex::new(&weights)
        .map_err(|e| Error::Spec(format!("degenerate cell intensities: {e}")))?;
    let mut counts = vec![0usize; weights.len()];
    for _ in 0..spec.trips {
        counts[cells.sample(&mut trip_rng)] += 1;
    }

    let passengers_dist = WeightedIndex::new([0.55, 0.25, 0.12, 0.08]).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut trips = Vec::with_capacity(spec.trips);
    let mut corrupted = 0;
    let mut by_dow = [0usize; 7];

    for (cell, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let hour_start = weather[cell / n_spots].observed_at;
        let spot_index = cell % n_spots;
        let spot = &spec.hotspots[spot_index];
        let mut minutes: Vec<i64> = (0..count).map(|_| trip_rng.random_range(0..60)).collect();
        minutes.sort_unstable();
        for minute in minutes {
            let pickup_at = hour_start + Duration::minutes(minute);
            let duration = Duration::minutes(trip_rng.random_range(8..46));
            let passengers = passengers_dist.sample(&mut trip_rng) as u32 + 1;
            let origin_lat = spot.lat + spot.spread * unit.sample(&mut trip_rng);
            let origin_lon = spot.lon + spot.spread * unit.sample(&mut trip_rng);
            let dest = if n_spots > 1 {
                let offset = trip_rng.random_range(1..n_spots);
                &spec.hotspots[(spot_index + offset) % n_spots]
            } else {
                spot
            };
            let dest_lat = dest.lat + 2.0 * dest.spread * unit.sample(&mut trip_rng);
            let dest_lon = dest.lon + 2.0 * dest.spread * unit.sample(&mut trip_rng);
            let mut trip = TripRecord {
                pickup_at,
                dropoff_at: pickup_at + duration,
                passengers,
                origin_lat: round_to(origin_lat, 6).clamp(-90.0, 90.0),
                origin_lon: round_to(origin_lon, 6).clamp(-180.0, 180.0),
                dest_lat: round_to(dest_lat, 6).clamp(-90.0, 90.0),
                dest_lon: round_to(dest_lon, 6).clamp(-180.0, 180.0),
            };
            if trip_rng.random::<f64>() < spec.missing_rate {
                corrupted += 1;
                if trip_rng.random::<bool>() {
                    trip.dropoff_at = trip.pickup_at - Duration::minutes(5);
                } else {
                    trip.passengers = 0;
                }
            } else {
                by_dow[pickup_at.date().weekday().num_days_from_sunday() as usize] += 1;
            }
            trips.push(trip);
        }
    }

    let missing_visibility = weather.iter().filter(|w| w.visibility.is_none()).count();
    let manifest = SyntheticManifest {
        seed,
        spec: spec.clone(),
        trips_written: trips.len(),
        corrupted_trips: corrupted,
        weather_hours: weather.len(),
        missing_visibility,
        planted_drivers: ["location_id", "weekday", "time_slot", "condition"]
            .map(String::from)
            .to_vec(),
        trips_by_day_of_week: by_dow,
    };
    Ok(SyntheticData {
        trips,
        weather,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_trips, parse_weather, write_trips, write_weather};

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            trips: 4_000,
            start_date: NaiveDate::from_ymd_opt(2015, 5, 4).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2015, 5, 17).unwrap(),
            missing_rate: 0.0,
            ..SyntheticSpec::default()
        }
    }

    fn to_files(data: &SyntheticData) -> (Vec<u8>, Vec<u8>) {
        let mut trips = Vec::new();
        let mut weather = Vec::new();
        write_trips(&mut trips, &data.trips).unwrap();
        write_weather(&mut weather, &data.weather).unwrap();
        (trips, weather)
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic(&small_spec(), 7).unwrap();
        let b = generate_synthetic(&small_spec(), 7).unwrap();
        assert_eq!(to_files(&a), to_files(&b));
        assert_eq!(a.manifest, b.manifest);
        let c = generate_synthetic(&small_spec(), 8).unwrap();
        assert_ne!(to_files(&a).0, to_files(&c).0);
    }

    #[test]
    fn zero_missing_rate_reparses_cleanly() {
        let data = generate_synthetic(&small_spec(), 3).unwrap();
        let (trips, weather) = to_files(&data);
        let (parsed, report) = parse_trips(trips.as_slice()).unwrap();
        assert_eq!(report.rejected, 0);
        assert_eq!(parsed.len(), 4_000);
        let (hours, wreport) = parse_weather(weather.as_slice()).unwrap();
        assert_eq!(wreport.rejected, 0);
        assert!(wreport.missing.is_empty());
        assert_eq!(hours.len(), 14 * 24);
    }

    #[test]
    fn corruption_is_rejected_on_reparse() {
        let spec = SyntheticSpec {
            missing_rate: 0.05,
            ..small_spec()
        };
        let data = generate_synthetic(&spec, 3).unwrap();
        let (trips, weather) = to_files(&data);
        let (_, report) = parse_trips(trips.as_slice()).unwrap();
        assert_eq!(report.rejected, data.manifest.corrupted_trips);
        assert!(report.rejected > 0);
        let (_, wreport) = parse_weather(weather.as_slice()).unwrap();
        assert_eq!(
            wreport.missing.get("visibility").copied().unwrap_or(0),
            data.manifest.missing_visibility
        );
    }

    #[test]
    fn weekday_multiplier_shows_in_day_counts() {
        // two Mondays and two Sundays, no weather suppression
        let spec = SyntheticSpec {
            trips: 40_000,
            rain_suppression: 1.0,
            ..small_spec()
        };
        let data = generate_synthetic(&spec, 11).unwrap();
        let mut by_day = [0usize; 7];
        for t in &data.trips {
            by_day[t.pickup_at.weekday().num_days_from_sunday() as usize] += 1;
        }
        let ratio = by_day[1] as f64 / by_day[0] as f64;
        assert!((ratio - 2.0).abs() <= 0.2, "monday/sunday ratio {ratio}");
    }

    #[test]
    fn spec_errors() {
        let empty_range = SyntheticSpec {
            end_date: NaiveDate::from_ymd_opt(2015, 5, 1).unwrap(),
            ..small_spec()
        };
        assert!(matches!(generate_synthetic(&empty_range, 1), Err(Error::Spec(_))));
        let no_spots = SyntheticSpec {
            hotspots: vec![],
            ..small_spec()
        };
        assert!(matches!(generate_synthetic(&no_spots, 1), Err(Error::Spec(_))));
    }
}
