//! Discrete AdaBoost over weighted CART classifiers, and the
//! median-combination boosting variant for regression.

use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Presorted, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::model::cmp_f64;

/// Error floor used for the final weight when a weak learner is perfect.
const PERFECT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub weighted_error: f64,
    pub alpha: f64,
    /// Training error of the ensemble after this round.
    pub train_error: f64,
    /// Running product of 2·√(ε(1−ε)).
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostClassifier {
    learners: Vec<(f64, Tree)>,
    /// Used only when no weak learner beat chance.
    fallback_label: u8,
}

fn sign_label(p: f64) -> f64 {
    if p > 0.5 {
        1.0
    } else {
        -1.0
    }
}

impl AdaBoostClassifier {
    /// `y` holds 0/1 labels.
    pub fn fit(x: &Matrix, y: &[f64], rounds: usize, weak_depth: usize, min_leaf: usize) -> (Self, Vec<BoostRound>) {
        let n = x.rows();
        let presorted = Presorted::new(x);
        let params = TreeParams {
            criterion: Criterion::Gini,
            max_depth: weak_depth.max(1),
            min_leaf,
            max_features: None,
        };
        let ys: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 1.0 } else { -1.0 }).collect();
        let mut w = vec![1.0 / n as f64; n];
        let mut margin = vec![0.0; n];
        let mut learners = Vec::new();
        let mut history = Vec::new();
        let mut bound = 1.0;

        for _ in 0..rounds {
            let tree = Tree::fit(x, y, &w, &presorted, params, None);
            let h: Vec<f64> = x.iter_rows().map(|r| sign_label(tree.predict_row(r))).collect();
            let eps: f64 = (0..n).filter(|&i| h[i] != ys[i]).map(|i| w[i]).sum();
            if eps >= 0.5 {
                break;
            }
            let perfect = eps <= PERFECT_EPS;
            let e = eps.max(PERFECT_EPS);
            let alpha = 0.5 * ((1.0 - e) / e).ln();

            let mut z = 0.0;
            for i in 0..n {
                margin[i] += alpha * h[i];
                w[i] *= (-alpha * ys[i] * h[i]).exp();
                z += w[i];
            }
            w.iter_mut().for_each(|v| *v /= z);

            bound *= 2.0 * (eps * (1.0 - eps)).sqrt();
            let wrong = (0..n)
                .filter(|&i| (if margin[i] > 0.0 { 1.0 } else { -1.0 }) != ys[i])
                .count();
            let train_error = wrong as f64 / n as f64;
            debug_assert!(train_error <= bound + 1e-12, "boosting bound violated");
            history.push(BoostRound {
                weighted_error: eps,
                alpha,
                train_error,
                bound,
            });
            learners.push((alpha, tree));
            if perfect {
                break;
            }
        }

        let positives = y.iter().filter(|&&v| v > 0.5).count();
        let fallback_label = u8::from(2 * positives > n);
        (
            AdaBoostClassifier {
                learners,
                fallback_label,
            },
            history,
        )
    }

    pub fn rounds(&self) -> usize {
        self.learners.len()
    }

    /// Returns (label, score) where score = (F / Σα + 1) / 2.
    pub fn predict_row(&self, row: &[f64]) -> (u8, f64) {
        if self.learners.is_empty() {
            return (self.fallback_label, f64::from(self.fallback_label));
        }
        let mut f = 0.0;
        let mut total = 0.0;
        for (alpha, tree) in &self.learners {
            f += alpha * sign_label(tree.predict_row(row));
            total += alpha;
        }
        (u8::from(f > 0.0), (f / total + 1.0) / 2.0)
    }
}

/// Boosted regression trees combined by weighted median, with linear-loss
/// reweighting `w ← w · β^(1 − L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostRegressor {
    learners: Vec<(f64, Tree)>,
}

impl AdaBoostRegressor {
    pub fn fit(x: &Matrix, y: &[f64], rounds: usize, weak_depth: usize, min_leaf: usize) -> (Self, Vec<f64>) {
        let n = x.rows();
        let presorted = Presorted::new(x);
        let params = TreeParams {
            criterion: Criterion::Variance,
            max_depth: weak_depth.max(1),
            min_leaf,
            max_features: None,
        };
        let mut w = vec![1.0 / n as f64; n];
        let mut learners = Vec::new();
        let mut losses = Vec::new();

        for _ in 0..rounds {
            let tree = Tree::fit(x, y, &w, &presorted, params, None);
            let err: Vec<f64> = x
                .iter_rows()
                .zip(y)
                .map(|(r, &t)| (tree.predict_row(r) - t).abs())
                .collect();
            let max_err = err.iter().copied().fold(0.0, f64::max);
            if max_err <= 0.0 {
                learners.push((1.0, tree));
                losses.push(0.0);
                break;
            }
            let loss: Vec<f64> = err.iter().map(|e| e / max_err).collect();
            let avg: f64 = loss.iter().zip(&w).map(|(l, w)| l * w).sum();
            if avg >= 0.5 {
                if learners.is_empty() {
                    learners.push((1.0, tree));
                    losses.push(avg);
                }
                break;
            }
            let beta = avg.max(PERFECT_EPS) / (1.0 - avg);
            let mut z = 0.0;
            for (wi, li) in w.iter_mut().zip(&loss) {
                *wi *= beta.powf(1.0 - li);
                z += *wi;
            }
            w.iter_mut().for_each(|v| *v /= z);
            learners.push(((1.0 / beta).ln(), tree));
            losses.push(avg);
        }
        (AdaBoostRegressor { learners }, losses)
    }

    pub fn rounds(&self) -> usize {
        self.learners.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut preds: Vec<(f64, f64)> = self
            .learners
            .iter()
            .map(|(w, t)| (t.predict_row(row), *w))
            .collect();
        weighted_median(&mut preds)
    }
}

/// Smallest value whose cumulative weight reaches half the total.
pub fn weighted_median(values: &mut [(f64, f64)]) -> f64 {
    values.sort_by(|a, b| cmp_f64(a.0, b.0));
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(v, w) in values.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    values.last().map_or(0.0, |v| v.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_picks_heavy_value() {
        assert_eq!(weighted_median(&mut [(1.0, 1.0), (5.0, 3.0), (2.0, 1.0)]), 5.0);
        assert_eq!(weighted_median(&mut [(1.0, 1.0), (2.0, 1.0)]), 1.0);
    }

    #[test]
    fn regressor_fits_step_function() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 1.0 } else { 5.0 }).collect();
        let (m, _) = AdaBoostRegressor::fit(&x, &y, 10, 1, 1);
        assert_eq!(m.predict_row(&[3.0]), 1.0);
        assert_eq!(m.predict_row(&[15.0]), 5.0);
    }

    #[test]
    fn perfect_first_learner_stops() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let (m, hist) = AdaBoostClassifier::fit(&x, &[0.0, 1.0], 10, 1, 1);
        assert_eq!(m.rounds(), 1);
        assert_eq!(hist[0].train_error, 0.0);
    }
}
