use std::collections::BTreeSet;

use farecast::features::{build_dataset, FeatureContext, RouteIndex};
use farecast::ingest::group_series;
use farecast::learners::{fit, LearnerKind, LearnerSpec, Task};
use farecast::matrix::{feature_matrix, Target};
use farecast::model::{Dataset, DatasetRole};
use farecast::preprocess::Preprocessing;
use farecast::seed::derive_seed;
use farecast::synthgen::{generate_corpus, GenConfig};
use farecast::tuning::{cv_folds, grid_search, series_folds};
use proptest::prelude::*;

fn small_dataset() -> Dataset {
    let mut cfg = GenConfig::default_specific(3);
    cfg.routes.truncate(2);
    cfg.departures = 8;
    cfg.horizon_days = 20;
    let series = group_series(generate_corpus(&cfg).unwrap()).unwrap();
    let ctx = FeatureContext::from_series(&series).unwrap();
    let routes = RouteIndex::from_series(&series).unwrap();
    build_dataset(&series, Some(&routes), &ctx, DatasetRole::Train).unwrap()
}

fn no_prep() -> Preprocessing {
    Preprocessing {
        oversample: false,
        ..Preprocessing::default()
    }
}

proptest! {
    #[test]
    fn folds_partition_evenly(n in 1usize..300, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = cv_folds(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let all: Vec<usize> = folds.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(all.iter().copied().collect::<BTreeSet<_>>(), (0..n).collect::<BTreeSet<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(&folds, &cv_folds(n, k, seed).unwrap());
    }
}

#[test]
fn too_few_items_is_an_error() {
    assert!(cv_folds(3, 5, 0).is_err());
    assert!(cv_folds(3, 0, 0).is_err());
}

#[test]
fn series_stay_in_one_fold() {
    let data = small_dataset();
    let folds = series_folds(&data, 5, 9).unwrap();
    let mut fold_of = std::collections::BTreeMap::new();
    for (f, rows) in folds.iter().enumerate() {
        for &i in rows {
            let prev = fold_of.insert(data.rows[i].key.clone(), f);
            assert!(prev.is_none_or(|p| p == f), "series split across folds");
        }
    }
    assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), data.len());
}

#[test]
fn grid_search_matches_manual_cross_validation() {
    let data = small_dataset();
    let cart = |depth: f64| LearnerSpec::new(LearnerKind::Cart, Task::Classification).with("max_depth", depth);
    // A duplicate cell ties with its twin, which must win.
    let grid = vec![cart(1.0), cart(3.0), cart(1.0), cart(6.0)];
    let seed = 21;
    let (best, table) = grid_search(&grid, &data, &no_prep(), 4, seed).unwrap();
    assert_eq!(table.metric, "error_rate");
    assert_eq!(table.rows.len(), grid.len());

    let folds = series_folds(&data, 4, derive_seed(seed, &["folds"])).unwrap();
    for (spec, row) in grid.iter().zip(&table.rows) {
        for (f, val_rows) in folds.iter().enumerate() {
            let fit_rows: Vec<_> = (0..data.len()).filter(|i| !val_rows.contains(i)).map(|i| data.rows[i].clone()).collect();
            let val: Vec<_> = val_rows.iter().map(|&i| data.rows[i].clone()).collect();
            let model = fit(spec, &Dataset::new(fit_rows, data.role).design(Target::Class), derive_seed(seed, &["cv", &f.to_string()])).unwrap();
            let labels = model.predict(&feature_matrix(&val)).unwrap().labels().unwrap().to_vec();
            let wrong = labels.iter().zip(&val).filter(|(l, r)| **l != r.label_class).count();
            assert!((row.fold_losses[f] - wrong as f64 / val.len() as f64).abs() < 1e-15);
        }
        let mean = row.fold_losses.iter().sum::<f64>() / 4.0;
        assert!((row.mean_loss.unwrap() - mean).abs() < 1e-15);
    }
    assert_eq!(table.rows[0].fold_losses, table.rows[2].fold_losses);
    let min = table.rows.iter().filter_map(|r| r.mean_loss).fold(f64::INFINITY, f64::min);
    let first = table.rows.iter().position(|r| r.mean_loss == Some(min)).unwrap();
    assert_eq!(best, grid[first]);
    assert_ne!(first, 2);
}

#[test]
fn cv_table_csv_has_one_line_per_cell() {
    let data = small_dataset();
    let grid = vec![
        LearnerSpec::new(LearnerKind::Knn, Task::Classification).with("k", 1.0),
        LearnerSpec::new(LearnerKind::Knn, Task::Classification).with("k", 5.0),
    ];
    let (_, table) = grid_search(&grid, &data, &no_prep(), 3, 0).unwrap();
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cell,spec,metric,mean_loss,variance,fold_1,fold_2,fold_3,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn mixed_tasks_are_rejected() {
    let data = small_dataset();
    let grid = vec![
        LearnerSpec::new(LearnerKind::Cart, Task::Classification),
        LearnerSpec::new(LearnerKind::Cart, Task::Regression),
    ];
    assert!(grid_search(&grid, &data, &no_prep(), 3, 0).is_err());
    assert!(grid_search(&[], &data, &no_prep(), 3, 0).is_err());
}
