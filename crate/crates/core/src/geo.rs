//! Lloyd's k-means over pickup coordinates.
//!
//! Distances are squared Euclidean in raw degrees. Initial centroids are `K`
//! distinct input points sampled from the seed; an emptied cluster is
//! reseeded with the point farthest from its current centroid. Lloyd's
//! iterations only reach a local optimum, so the fit is restarted from
//! several seed-derived initializations and the lowest objective is kept.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_indexed, rng_from};

pub type Point = [f64; 2];

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_RESTARTS: usize = 30;

/// Above this many points the assignment step is split across threads.
const PARALLEL_ASSIGN_THRESHOLD: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// `(lat, lon)` per cluster; location ID `i + 1` is `centroids[i]`.
    pub centroids: Vec<Point>,
    pub seed: u64,
    pub iterations_run: usize,
    /// Sum of squared distances to the nearest centroid.
    pub wcss: f64,
    /// Objective after each (assign, recompute) iteration.
    #[serde(default)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent initializations; the run with the lowest objective wins
    /// (ties go to the earliest run).
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[inline]
fn sq_dist(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Index of the nearest centroid; ties go to the lowest index.
#[inline]
fn nearest(point: &Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(point, &centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn assign_all(points: &[Point], centroids: &[Point], out: &mut [usize]) {
    if points.len() >= PARALLEL_ASSIGN_THRESHOLD {
        out.par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(slot, p)| *slot = nearest(p, centroids));
    } else {
        for (slot, p) in out.iter_mut().zip(points) {
            *slot = nearest(p, centroids);
        }
    }
}

fn check_points(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::argument("k-means needs at least one point"));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::argument("non-finite coordinate"));
    }
    Ok(())
}

/// Sample `K` distinct input points as starting centroids.
pub fn initial_centroids(points: &[Point], k: usize, seed: u64) -> Result<Vec<Point>> {
    check_points(points)?;
    if k == 0 || k > points.len() {
        return Err(Error::argument(format!(
            "K must lie in 1..={} (got {k})",
            points.len()
        )));
    }
    let mut rng = rng_from(seed);
    let mut picked = rand::seq::index::sample(&mut rng, points.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| points[i]).collect())
}

/// Seed of the initialization used by restart `run`.
pub fn restart_seed(seed: u64, run: usize) -> u64 {
    if run == 0 {
        seed
    } else {
        derive_indexed(seed, "kmeans-restart", run)
    }
}

pub fn kmeans_fit(points: &[Point], params: KMeansParams) -> Result<ClusterModel> {
    let mut best: Option<ClusterModel> = None;
    for run in 0..params.restarts.max(1) {
        let init = initial_centroids(points, params.k, restart_seed(params.seed, run))?;
        let model = kmeans_from(points, init, params.max_iter, params.tol)?;
        if best.as_ref().is_none_or(|b| model.wcss < b.wcss) {
            best = Some(model);
        }
    }
    let mut model = best.expect("at least one run");
    model.seed = params.seed;
    Ok(model)
}

/// Run Lloyd iterations from explicit starting centroids.
pub fn kmeans_from(
    points: &[Point],
    init: Vec<Point>,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    check_points(points)?;
    let k = init.len();
    if k == 0 || k > points.len() {
        return Err(Error::argument("K must lie in 1..=|points|"));
    }
    if max_iter == 0 {
        return Err(Error::argument("max_iter must be at least 1"));
    }
    if !(tol >= 0.0) {
        return Err(Error::argument("tol must be non-negative"));
    }

    let mut centroids = init;
    let mut assignment = vec![usize::MAX; points.len()];
    let mut next = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        assign_all(points, &centroids, &mut next);
        if iterations > 0 && next == assignment {
            break;
        }
        std::mem::swap(&mut assignment, &mut next);
        iterations += 1;

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            counts[c] += 1;
        }
        // reseed emptied clusters with the worst-served point
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let (far, _) = points
                .iter()
                .zip(&assignment)
                .enumerate()
                .filter(|(_, (_, &c))| counts[c] > 1)
                .map(|(i, (p, &c))| (i, sq_dist(p, &centroids[c])))
                .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if far == usize::MAX {
                break;
            }
            let donor = assignment[far];
            let p = points[far];
            sums[donor][0] -= p[0];
            sums[donor][1] -= p[1];
            counts[donor] -= 1;
            sums[empty] = p;
            counts[empty] = 1;
            assignment[far] = empty;
        }

        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let n = counts[c] as f64;
            let updated = [sums[c][0] / n, sums[c][1] / n];
            shift = shift.max(sq_dist(&updated, &centroids[c]).sqrt());
            centroids[c] = updated;
        }
        trace.push(
            points
                .iter()
                .zip(&assignment)
                .map(|(p, &c)| sq_dist(p, &centroids[c]))
                .sum(),
        );
        if shift < tol {
            break;
        }
    }

    let mut model = ClusterModel {
        k,
        centroids,
        seed: 0,
        iterations_run: iterations,
        wcss: 0.0,
        trace,
    };
    model.wcss = wcss_of(points, &model);
    Ok(model)
}

/// 1-based location ID of the nearest centroid.
pub fn assign_location(point: Point, model: &ClusterModel) -> Result<u32> {
    if !point[0].is_finite() || !point[1].is_finite() {
        return Err(Error::argument("non-finite coordinate"));
    }
    Ok(nearest(&point, &model.centroids) as u32 + 1)
}

pub fn wcss_of(points: &[Point], model: &ClusterModel) -> f64 {
    points
        .iter()
        .map(|p| sq_dist(p, &model.centroids[nearest(p, &model.centroids)]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model_with(centroids: Vec<Point>) -> ClusterModel {
        ClusterModel {
            k: centroids.len(),
            centroids,
            seed: 0,
            iterations_run: 0,
            wcss: 0.0,
            trace: vec![],
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]];
        let m = kmeans_fit(&pts, KMeansParams::new(1, 3)).unwrap();
        assert_abs_diff_eq!(m.centroids[0][0], 2.0);
        assert_abs_diff_eq!(m.centroids[0][1], 0.0);
        assert_abs_diff_eq!(m.wcss, 8.0);
        assert_abs_diff_eq!(wcss_of(&pts, &m), 8.0);
    }

    #[test]
    fn two_well_separated_pairs() {
        let pts = [[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
        for seed in 0..10 {
            let m = kmeans_fit(&pts, KMeansParams::new(2, seed)).unwrap();
            let mut cs = m.centroids.clone();
            cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(cs, vec![[0.0, 0.5], [10.0, 10.5]], "seed {seed}");
            assert_abs_diff_eq!(m.wcss, 1.0);
        }
    }

    #[test]
    fn argument_errors() {
        let pts = [[0.0, 0.0], [1.0, 1.0]];
        assert!(kmeans_fit(&pts, KMeansParams::new(3, 0)).is_err());
        assert!(kmeans_fit(&pts, KMeansParams::new(0, 0)).is_err());
        assert!(kmeans_fit(&[], KMeansParams::new(1, 0)).is_err());
        assert!(kmeans_fit(&[[f64::NAN, 0.0]], KMeansParams::new(1, 0)).is_err());
        let m = model_with(vec![[0.0, 0.0]]);
        assert!(assign_location([f64::INFINITY, 0.0], &m).is_err());
    }

    #[test]
    fn assignment_rules() {
        let m = model_with(vec![[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]);
        assert_eq!(assign_location([5.0, 5.0], &m).unwrap(), 3);
        assert_eq!(assign_location([1.0, 0.0], &m).unwrap(), 1);
        let one = model_with(vec![[3.0, 3.0]]);
        assert_eq!(assign_location([-80.0, 170.0], &one).unwrap(), 1);
    }

    #[test]
    fn wcss_zero_on_centroids() {
        let m = model_with(vec![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(wcss_of(&[[1.0, 2.0], [3.0, 4.0], [1.0, 2.0]], &m), 0.0);
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // two identical starting centroids: the second cluster starts empty
        let pts = [[0.0, 0.0], [0.0, 1.0], [9.0, 9.0], [9.0, 10.0]];
        let m = kmeans_from(&pts, vec![[0.0, 0.0], [0.0, 0.0]], 50, 0.0).unwrap();
        let mut cs = m.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cs, vec![[0.0, 0.5], [9.0, 9.5]]);
    }

    #[test]
    fn converged_model_is_a_fixed_point() {
        let pts: Vec<Point> = (0..60)
            .map(|i| {
                let t = i as f64;
                [(t * 0.37).sin() * 5.0 + (i % 3) as f64 * 20.0, (t * 0.91).cos() * 5.0]
            })
            .collect();
        let m = kmeans_fit(&pts, KMeansParams { tol: 0.0, ..KMeansParams::new(3, 4) }).unwrap();
        let again = kmeans_from(&pts, m.centroids.clone(), 1, 0.0).unwrap();
        assert_eq!(again.centroids, m.centroids);
        assert_abs_diff_eq!(again.wcss, m.wcss, epsilon = 1e-9);
    }
}
