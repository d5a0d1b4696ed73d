//! Small end-to-end runs through the public API.

mod common;

use chrono::NaiveDate;
use skyport_core::eval::{
    cross_validate_samples, evaluate, gb_grid, grid_search_samples, macro_f1, split_indices,
    CvOptions,
};
use skyport_core::features::{aggregate_samples, clean, encode_split, join_weather, Imputation, Sample};
use skyport_core::geo::{kmeans_fit, KMeansParams};
use skyport_core::importance::permutation_importance;
use skyport_core::ingest::{generate_synthetic, SyntheticSpec};
use skyport_core::learners::forest::rf_fit;
use skyport_core::learners::tree::{tree_fit, TreeHyper};
use skyport_core::learners::{fit, Classifier, GbHyper, Hyper, RfHyper};

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        trips: 6_000,
        start_date: NaiveDate::from_ymd_opt(2015, 4, 6).unwrap(),
        end_date: NaiveDate::from_ymd_opt(2015, 4, 19).unwrap(),
        ..SyntheticSpec::default()
    }
}

fn prepared(seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    let data = generate_synthetic(&small_spec(), seed).unwrap();
    let trips: Vec<_> = data.trips.into_iter().filter(|t| t.is_valid()).collect();
    let points: Vec<[f64; 2]> = trips.iter().map(|t| [t.origin_lat, t.origin_lon]).collect();
    let model = kmeans_fit(&points, KMeansParams::new(5, seed)).unwrap();
    let mut samples = aggregate_samples(&trips, &model).unwrap();
    join_weather(&mut samples, &data.weather);
    let samples = clean(samples, Imputation::Listwise).unwrap();
    let (train, test) = split_indices(samples.len(), 0.7, seed).unwrap();
    (
        train.iter().map(|&i| samples[i].clone()).collect(),
        test.iter().map(|&i| samples[i].clone()).collect(),
    )
}

#[test]
fn centroids_land_on_planted_hotspots() {
    let spec = small_spec();
    let data = generate_synthetic(&spec, 3).unwrap();
    let points: Vec<[f64; 2]> = data
        .trips
        .iter()
        .filter(|t| t.is_valid())
        .map(|t| [t.origin_lat, t.origin_lon])
        .collect();
    let model = kmeans_fit(&points, KMeansParams::new(5, 11)).unwrap();
    let mut matched = vec![false; spec.hotspots.len()];
    for c in &model.centroids {
        let (best, dist) = spec
            .hotspots
            .iter()
            .enumerate()
            .map(|(i, h)| (i, ((c[0] - h.lat).powi(2) + (c[1] - h.lon).powi(2)).sqrt()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(dist < spec.hotspots[best].spread, "centroid {c:?} is {dist} from hotspot {best}");
        matched[best] = true;
    }
    assert!(matched.iter().all(|&m| m), "every hotspot gets its own centroid");
}

#[test]
fn singleton_grid_equals_direct_cross_validation() {
    let (train, _) = prepared(1);
    let hyper = Hyper::Gb(GbHyper {
        n_trees: 20,
        ..GbHyper::default()
    });
    let grid = grid_search_samples(std::slice::from_ref(&hyper), &train, CvOptions::new(5), 9).unwrap();
    let direct = cross_validate_samples(&hyper, &train, CvOptions::new(5), 9).unwrap();
    assert_eq!(grid.cells[0], direct);
    assert_eq!(grid.best, 0);
    assert_eq!(grid.fold_sizes.iter().sum::<usize>(), train.len());
}

#[test]
fn grid_search_scores_every_cell() {
    let (train, _) = prepared(2);
    let grid = gb_grid(&GbHyper::default(), &[5, 20, 40]);
    let result = grid_search_samples(&grid, &train, CvOptions::new(3), 4).unwrap();
    assert_eq!(result.cells.len(), 3);
    let best = result.cells[result.best].mean_f1;
    assert!(result.cells.iter().all(|c| c.mean_f1 <= best));
    assert!(result.cells.iter().all(|c| c.fold_scores.len() == 3 && c.error.is_none()));
}

#[test]
fn fits_are_byte_deterministic() {
    let (train, test) = prepared(3);
    let encoded = encode_split(&train, &test).unwrap();
    for hyper in [
        Hyper::Rf(RfHyper {
            n_trees: 15,
            ..RfHyper::default()
        }),
        Hyper::Gb(GbHyper {
            n_trees: 15,
            ..GbHyper::default()
        }),
    ] {
        let a = fit(&encoded.train, &hyper, 17).unwrap().to_json().unwrap();
        let b = fit(&encoded.train, &hyper, 17).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn learners_beat_chance_on_planted_data() {
    let (train, test) = prepared(4);
    let encoded = encode_split(&train, &test).unwrap();
    for hyper in [
        Hyper::Rf(RfHyper {
            n_trees: 50,
            ..RfHyper::default()
        }),
        Hyper::Gb(GbHyper {
            n_trees: 100,
            ..GbHyper::default()
        }),
    ] {
        let model = fit(&encoded.train, &hyper, 5).unwrap();
        let f1 = macro_f1(&evaluate(&model, &encoded.test));
        assert!(f1 > 0.45, "{} reached only {f1}", hyper.label());
    }
}

#[test]
fn forest_is_not_worse_than_a_single_tree() {
    let train = common::noisy_dataset(400, 21);
    let test = common::noisy_dataset(400, 22);
    let tree = tree_fit(&train, &vec![1.0; train.n_rows()], &TreeHyper::default()).unwrap();
    let forest = rf_fit(
        &train,
        &RfHyper {
            n_trees: 100,
            ..RfHyper::default()
        },
        8,
    )
    .unwrap();
    let accuracy = |m: &dyn Classifier| evaluate(m, &test).accuracy();
    assert!(accuracy(&forest) >= accuracy(&tree) - 0.02);
}

#[test]
fn boosting_fits_separable_data() {
    let rows: Vec<Vec<f64>> = (0..90).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
    let labels = (0..90)
        .map(|i| skyport_core::Demand::from_index(i / 30))
        .collect();
    let m = skyport_core::FeatureMatrix::from_rows(&rows, labels).unwrap();
    let model = fit(
        &m,
        &Hyper::Gb(GbHyper {
            n_trees: 300,
            ..GbHyper::default()
        }),
        1,
    )
    .unwrap();
    assert!(evaluate(&model, &m).accuracy() >= 0.95);
}

#[test]
fn importance_leaves_the_matrix_untouched() {
    let (train, test) = prepared(5);
    let encoded = encode_split(&train, &test).unwrap();
    let model = fit(
        &encoded.train,
        &Hyper::Gb(GbHyper {
            n_trees: 30,
            ..GbHyper::default()
        }),
        2,
    )
    .unwrap();
    let before = encoded.test.clone();
    let table =
        permutation_importance(&model, &encoded.test, encoded.test.groups(), 3, 6).unwrap();
    assert_eq!(encoded.test, before);
    assert_eq!(table.rows.len(), 11);
    let mut ranks: Vec<usize> = table.rows.iter().map(|r| r.rank).collect();
    ranks.sort_unstable();
    assert_eq!(ranks, (1..=11).collect::<Vec<_>>());
}
