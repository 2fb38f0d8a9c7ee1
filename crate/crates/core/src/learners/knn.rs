use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::cmp_f64;
use crate::preprocess::Standardizer;

/// Brute-force k nearest neighbours over standardized continuous features,
/// with categorical columns passed through unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    scaler: Standardizer,
    points: Matrix,
    targets: Vec<f64>,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[f64], categorical: &[bool], k: usize) -> Result<Self> {
        let scaler = Standardizer::fit(x, categorical)?;
        let points = scaler.transform(x)?;
        Ok(Knn {
            k: k.max(1),
            scaler,
            points,
            targets: y.to_vec(),
        })
    }

    /// Mean target of the k nearest stored points; distance ties go to the
    /// earlier training row.
    pub fn mean_target(&self, row: &[f64], buf: &mut Vec<f64>) -> f64 {
        self.scaler.transform_row(row, buf);
        let k = self.k.min(self.points.rows());
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter_rows()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(buf.iter()).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| cmp_f64(a.0, b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by);
        }
        dist[..k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_in()
    }
}
