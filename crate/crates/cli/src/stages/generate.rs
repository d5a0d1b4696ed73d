use std::path::PathBuf;

use skyport_core::ingest::{generate_synthetic, write_trips, write_weather, SyntheticManifest};
use skyport_core::seed::derive_seed;

use crate::artifacts::{create, write_json};
use crate::config::RunConfig;
use crate::error::CliResult;

/// The manifest sits next to the trips file.
pub fn manifest_path(config: &RunConfig) -> PathBuf {
    config.trips_path().with_file_name("manifest.json")
}

pub fn run(config: &RunConfig) -> CliResult<SyntheticManifest> {
    config.synthetic.validate()?;
    let data = generate_synthetic(&config.synthetic, derive_seed(config.seed, &["generate"]))?;
    let trips = config.trips_path();
    let weather = config.weather_path();
    write_trips(create(&trips)?, &data.trips)?;
    write_weather(create(&weather)?, &data.weather)?;
    write_json(&manifest_path(config), &data.manifest)?;
    println!(
        "generate: {} trips -> {}, {} weather hours -> {}",
        data.trips.len(),
        trips.display(),
        data.weather.len(),
        weather.display()
    );
    Ok(data.manifest)
}
