//! Permutation feature importance.
//!
//! A feature group (a whole one-hot block, or one continuous column) is
//! scored by how much the classification error `1 - accuracy` grows when
//! the group's values are shuffled across rows, averaged over repeats.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::learners::Classifier;
use crate::seed::{derive_seed, rng_from};

pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    /// Mean increase in classification error; may be negative.
    pub importance: f64,
    /// Sample standard deviation across repeats (0 for a single repeat).
    pub std: f64,
    /// 1 = most important.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub baseline_error: f64,
    pub repeats: usize,
    /// In feature declaration order.
    pub rows: Vec<ImportanceRow>,
}

fn check_partition(groups: &[FeatureGroup], n_cols: usize) -> Result<()> {
    let mut covered = vec![false; n_cols];
    for g in groups {
        if g.len == 0 {
            return Err(Error::argument(format!("feature group {} is empty", g.name)));
        }
        for c in g.columns() {
            match covered.get_mut(c) {
                None => {
                    return Err(Error::argument(format!(
                        "feature group {} exceeds the {n_cols} matrix columns",
                        g.name
                    )))
                }
                Some(true) => {
                    return Err(Error::argument(format!("column {c} belongs to two groups")))
                }
                Some(slot) => *slot = true,
            }
        }
    }
    if let Some(c) = covered.iter().position(|&v| !v) {
        return Err(Error::argument(format!("column {c} belongs to no group")));
    }
    Ok(())
}

fn error_rate<C: Classifier + ?Sized>(
    model: &C,
    matrix: &FeatureMatrix,
    permuted: Option<(&FeatureGroup, &[usize])>,
) -> f64 {
    let mut row = vec![0.0; matrix.n_cols()];
    let mut wrong = 0usize;
    for i in 0..matrix.n_rows() {
        row.copy_from_slice(matrix.row(i));
        if let Some((group, perm)) = permuted {
            let cols = group.columns();
            row[cols.clone()].copy_from_slice(&matrix.row(perm[i])[cols]);
        }
        if model.predict(&row).index() != matrix.label(i) {
            wrong += 1;
        }
    }
    wrong as f64 / matrix.n_rows() as f64
}

/// Importance of each group in `groups`, which must partition the columns
/// of `matrix`. The matrix is only read; shuffles are applied to row copies.
pub fn permutation_importance<C: Classifier + Sync + ?Sized>(
    model: &C,
    matrix: &FeatureMatrix,
    groups: &[FeatureGroup],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceTable> {
    check_partition(groups, matrix.n_cols())?;
    if repeats == 0 {
        return Err(Error::argument("permutation importance needs at least one repeat"));
    }
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyDataset("no rows to permute".into()));
    }
    let baseline_error = error_rate(model, matrix, None);
    let units: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..repeats).map(move |r| (g, r)))
        .collect();
    let increases: Vec<f64> = units
        .par_iter()
        .map(|&(g, r)| {
            let mut perm: Vec<usize> = (0..matrix.n_rows()).collect();
            perm.shuffle(&mut rng_from(derive_seed(
                seed,
                &["permute", &groups[g].name, &r.to_string()],
            )));
            error_rate(model, matrix, Some((&groups[g], &perm))) - baseline_error
        })
        .collect();

    let mut rows: Vec<ImportanceRow> = groups
        .iter()
        .zip(increases.chunks(repeats))
        .map(|(g, inc)| {
            let mean = inc.iter().sum::<f64>() / repeats as f64;
            let std = if repeats > 1 {
                (inc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
            } else {
                0.0
            };
            ImportanceRow {
                feature: g.name.clone(),
                importance: mean,
                std,
                rank: 0,
            }
        })
        .collect();
    for (rank, i) in ranked_order(&rows).into_iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(ImportanceTable {
        baseline_error,
        repeats,
        rows,
    })
}

/// Row indices by descending importance, ties in declaration order.
fn ranked_order(rows: &[ImportanceRow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].importance.total_cmp(&rows[a].importance).then(a.cmp(&b)));
    order
}

/// The `n` most important features, most important first.
pub fn top_features(table: &ImportanceTable, n: usize) -> Vec<(String, f64)> {
    ranked_order(&table.rows)
        .into_iter()
        .take(n)
        .map(|i| (table.rows[i].feature.clone(), table.rows[i].importance))
        .collect()
}

/// Delimited form `feature,importance,std,rank` in declaration order.
pub fn write_importance_csv<W: Write>(sink: W, table: &ImportanceTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["feature", "importance", "std", "rank"])?;
    for r in &table.rows {
        w.write_record([
            r.feature.clone(),
            r.importance.to_string(),
            r.std.to_string(),
            r.rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Demand;
    use crate::learners::N_CLASSES;

    /// Predicts from column 0 only.
    struct FirstColumn;

    impl Classifier for FirstColumn {
        fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
            let mut p = [0.0; N_CLASSES];
            p[(row[0].max(0.0) as usize).min(2)] = 1.0;
            p
        }
    }

    fn data() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 3) as f64, (i % 5) as f64, 7.0])
            .collect();
        let labels = (0..30).map(|i| Demand::from_index(i % 3)).collect();
        FeatureMatrix::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn ignored_and_constant_columns_score_zero() {
        let m = data();
        let before = m.clone();
        let t = permutation_importance(&FirstColumn, &m, m.groups(), 5, 11).unwrap();
        assert_eq!(m, before);
        assert_eq!(t.baseline_error, 0.0);
        assert!(t.rows[0].importance > 0.3);
        assert_eq!(t.rows[1].importance, 0.0);
        assert_eq!(t.rows[2].importance, 0.0);
        assert_eq!(t.rows.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
        let top = top_features(&t, 2);
        assert_eq!(top[0].0, "x0");
        assert_eq!(top[1].0, "x1");
        assert_eq!(top_features(&t, 10).len(), 3);
    }

    #[test]
    fn deterministic() {
        let m = data();
        let a = permutation_importance(&FirstColumn, &m, m.groups(), 4, 3).unwrap();
        let b = permutation_importance(&FirstColumn, &m, m.groups(), 4, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn groups_must_partition_columns() {
        let m = data();
        let g = |name: &str, start, len| FeatureGroup {
            name: name.into(),
            start,
            len,
        };
        assert!(permutation_importance(&FirstColumn, &m, &[g("a", 0, 2)], 1, 0).is_err());
        assert!(permutation_importance(&FirstColumn, &m, &[g("a", 0, 2), g("b", 1, 2)], 1, 0).is_err());
        assert!(permutation_importance(&FirstColumn, &m, &[g("a", 0, 4)], 1, 0).is_err());
        assert!(permutation_importance(&FirstColumn, &m, &[g("a", 0, 1), g("b", 1, 2)], 1, 0).is_ok());
        assert!(permutation_importance(&FirstColumn, &m, m.groups(), 0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = data();
        let t = permutation_importance(&FirstColumn, &m, m.groups(), 1, 0).unwrap();
        let mut buf = Vec::new();
        write_importance_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("feature,importance,std,rank\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
