//! Synthetic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyport_core::geo::Point;
use skyport_core::{Demand, FeatureMatrix};

/// `n` pickup points scattered around `centers` hotspots.
pub fn pickups(n: usize, centers: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hubs: Vec<Point> = (0..centers)
        .map(|_| [rng.random_range(-74.05..-73.85), rng.random_range(40.6..40.85)])
        .collect();
    (0..n)
        .map(|i| {
            let [x, y] = hubs[i % centers];
            [x + rng.random_range(-0.01..0.01), y + rng.random_range(-0.01..0.01)]
        })
        .collect()
}

/// A labelled matrix with `cols` columns, the first three informative.
pub fn labelled(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|c| if c % 2 == 0 { rng.random_range(0..2) as f64 } else { rng.random_range(-1.0..1.0) }).collect())
        .collect();
    let labels = data
        .iter()
        .map(|r| {
            let score = r[0] + r[1] + r[2] + rng.random_range(-0.5..0.5);
            Demand::from_index(if score < 0.5 { 0 } else if score < 1.5 { 1 } else { 2 })
        })
        .collect();
    FeatureMatrix::from_rows(&data, labels).expect("rectangular rows")
}
