//! Series-grouped k-fold cross-validation and grid search.

use std::collections::BTreeMap;
use std::io::Write;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit, LearnerKind, LearnerSpec, Predictions, Task};
use crate::matrix::{feature_matrix, Target};
use crate::model::{Dataset, SeriesKey};
use crate::preprocess::Preprocessing;
use crate::seed::derive_seed;

pub const DEFAULT_FOLDS: usize = 5;

/// Partitions `0..n` into `k` shuffled folds whose sizes differ by at most one.
pub fn cv_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(Error::TooFewSeries { series: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Row-index folds of a dataset, keeping every series inside one fold.
pub fn series_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rows_of: BTreeMap<&SeriesKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in data.rows.iter().enumerate() {
        rows_of.entry(&r.key).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = rows_of.into_values().collect();
    Ok(cv_folds(groups.len(), k, seed)?
        .into_iter()
        .map(|f| {
            let mut rows: Vec<usize> = f.iter().flat_map(|&g| groups[g].iter().copied()).collect();
            rows.sort_unstable();
            rows
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub spec: LearnerSpec,
    pub fold_losses: Vec<f64>,
    pub mean_loss: Option<f64>,
    /// Population variance of the fold losses.
    pub variance: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub folds: usize,
    /// `error_rate` or `rmse`.
    pub metric: String,
    pub rows: Vec<CvRow>,
}

fn loss(pred: &Predictions, y: &[f64]) -> f64 {
    match pred {
        Predictions::Classification { labels, .. } => {
            labels.iter().zip(y).filter(|(l, t)| f64::from(**l) != **t).count() as f64 / y.len() as f64
        }
        Predictions::Regression(v) => (v.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64).sqrt(),
    }
}

fn target(task: Task) -> Target {
    match task {
        Task::Classification => Target::Class,
        Task::Regression => Target::MinPrice,
    }
}

/// Evaluates every spec by grouped k-fold CV, re-fitting preprocessing on
/// each training fold. Returns the lowest-mean-loss spec (first on ties).
pub fn grid_search(
    grid: &[LearnerSpec],
    train: &Dataset,
    prep: &Preprocessing,
    k: usize,
    seed: u64,
) -> Result<(LearnerSpec, CvTable)> {
    let first = grid.first().ok_or_else(|| Error::InvalidConfig("empty hyperparameter grid".into()))?;
    let task = first.task;
    if grid.iter().any(|s| s.task != task) {
        return Err(Error::InvalidConfig("grid mixes tasks".into()));
    }
    let folds = series_folds(train, k, derive_seed(seed, &["folds"]))?;
    let classification = task == Task::Classification;

    // Training-fold preprocessing is shared by every grid cell.
    let prepared: Vec<Result<(Dataset, Dataset)>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, val_rows)| {
            let mut in_val = vec![false; train.len()];
            val_rows.iter().for_each(|&i| in_val[i] = true);
            let fit_rows: Vec<_> = (0..train.len()).filter(|&i| !in_val[i]).map(|i| train.rows[i].clone()).collect();
            let val: Vec<_> = val_rows.iter().map(|&i| train.rows[i].clone()).collect();
            let (fit_set, _) = prep.apply(&Dataset::new(fit_rows, train.role), classification, derive_seed(seed, &["fold", &f.to_string()]))?;
            Ok((fit_set, Dataset::new(val, train.role)))
        })
        .collect();

    let rows: Vec<CvRow> = grid
        .par_iter()
        .map(|spec| {
            let losses: Result<Vec<f64>> = prepared
                .iter()
                .enumerate()
                .map(|(f, p)| {
                    let (fit_set, val) = p.as_ref().map_err(|e| Error::InvalidConfig(e.to_string()))?;
                    let model = fit(spec, &fit_set.design(target(task)), derive_seed(seed, &["cv", &f.to_string()]))?;
                    let pred = model.predict(&feature_matrix(&val.rows))?;
                    Ok(loss(&pred, &val.design(target(task)).y))
                })
                .collect();
            match losses {
                Ok(fold_losses) => {
                    let n = fold_losses.len() as f64;
                    let mean = fold_losses.iter().sum::<f64>() / n;
                    let var = fold_losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
                    CvRow {
                        spec: spec.clone(),
                        fold_losses,
                        mean_loss: Some(mean),
                        variance: Some(var),
                        error: None,
                    }
                }
                Err(e) => {
                    warn!("grid cell {} failed: {e}", spec.label());
                    CvRow {
                        spec: spec.clone(),
                        fold_losses: Vec::new(),
                        mean_loss: None,
                        variance: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(m) = r.mean_loss {
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((i, m));
            }
        }
    }
    let (best, loss) = best.ok_or(Error::AllCellsFailed)?;
    info!("best of {} cells: {} (cv loss {loss:.6})", rows.len(), rows[best].spec.label());
    Ok((
        rows[best].spec.clone(),
        CvTable {
            folds: k,
            metric: if classification { "error_rate" } else { "rmse" }.to_string(),
            rows,
        },
    ))
}

impl CvTable {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["cell".to_string(), "spec".into(), "metric".into(), "mean_loss".into(), "variance".into()];
        header.extend((1..=self.folds).map(|f| format!("fold_{f}")));
        header.push("status".into());
        w.write_record(&header)?;
        for (i, r) in self.rows.iter().enumerate() {
            let fmt = |v: Option<f64>| v.map(crate::report::sig6_string).unwrap_or_default();
            let mut rec = vec![i.to_string(), r.spec.label(), self.metric.clone(), fmt(r.mean_loss), fmt(r.variance)];
            rec.extend((0..self.folds).map(|f| fmt(r.fold_losses.get(f).copied())));
            rec.push(r.error.clone().unwrap_or_else(|| "ok".into()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default grid of a learner kind; blends get the grid of their base.
pub fn default_grid(kind: LearnerKind, task: Task) -> Vec<LearnerSpec> {
    let spec = |pairs: &[(&str, f64)]| {
        pairs
            .iter()
            .fold(LearnerSpec::new(kind, task), |s, (k, v)| s.with(k, *v))
    };
    match kind {
        LearnerKind::Cart => [3.0, 5.0, 8.0, 12.0].iter().map(|&d| spec(&[("max_depth", d)])).collect(),
        LearnerKind::AdaboostCart => {
            let mut g = Vec::new();
            for t in [50.0, 100.0, 200.0] {
                for d in [1.0, 2.0, 3.0] {
                    g.push(spec(&[("rounds", t), ("weak_depth", d)]));
                }
            }
            g
        }
        LearnerKind::RandomForest => [50.0, 100.0].iter().map(|&b| spec(&[("trees", b)])).collect(),
        LearnerKind::Knn => [3.0, 5.0, 7.0, 11.0].iter().map(|&k| spec(&[("k", k)])).collect(),
        LearnerKind::Mlp3 => {
            let mut g = Vec::new();
            for h in [8.0, 16.0, 32.0] {
                for lr in [0.01, 0.001] {
                    g.push(spec(&[("hidden", h), ("learning_rate", lr)]));
                }
            }
            g
        }
        LearnerKind::UniformBlend => default_grid(LearnerKind::AdaboostCart, task)
            .into_iter()
            .map(|b| LearnerSpec::new(kind, task).with_base(b))
            .collect(),
        LearnerKind::LeastSquares | LearnerKind::Logistic => vec![LearnerSpec::new(kind, task)],
    }
}
