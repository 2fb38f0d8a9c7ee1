use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Presorted, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// `None` disables feature subsampling.
    pub max_features: Option<usize>,
    /// `false` trains every tree on the identity sample.
    pub bootstrap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    criterion: Criterion,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[f64], criterion: Criterion, params: ForestParams, seed: u64) -> Self {
        let n = x.rows();
        let presorted = Presorted::new(x);
        let tree_params = TreeParams {
            criterion,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            max_features: params.max_features,
        };
        let trees = (0..params.trees.max(1))
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["tree", &b.to_string()]));
                let mut w = vec![0.0; n];
                if params.bootstrap {
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                } else {
                    w.fill(1.0);
                }
                Tree::fit(x, y, &w, &presorted, tree_params, Some(&mut rng))
            })
            .collect();
        RandomForest { criterion, trees }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Classification: (majority label with ties to 0, vote fraction).
    /// Regression: (mean, mean).
    pub fn predict_row(&self, row: &[f64]) -> (f64, f64) {
        let b = self.trees.len() as f64;
        match self.criterion {
            Criterion::Gini => {
                let votes = self
                    .trees
                    .iter()
                    .filter(|t| t.predict_row(row) > 0.5)
                    .count() as f64;
                let frac = votes / b;
                (f64::from(u8::from(frac > 0.5)), frac)
            }
            Criterion::Variance => {
                let m = self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / b;
                (m, m)
            }
        }
    }
}
