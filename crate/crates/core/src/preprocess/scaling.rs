use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Column {
    Scale { index: usize, mean: f64, std: f64 },
    Pass { index: usize },
}

/// Zero-mean unit-variance scaling fitted on training data only.
///
/// Zero-variance columns that are not passed through are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    n_in: usize,
    columns: Vec<Column>,
}

const MIN_STD: f64 = 1e-12;

impl Standardizer {
    pub fn fit(x: &Matrix, passthrough: &[bool]) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let n = x.rows() as f64;
        let mut columns = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            if passthrough.get(j).copied().unwrap_or(false) {
                columns.push(Column::Pass { index: j });
                continue;
            }
            let mean = x.column(j).sum::<f64>() / n;
            let var = x.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= MIN_STD * mean.abs().max(1.0) {
                warn!("dropping zero-variance feature column {j}");
                continue;
            }
            columns.push(Column::Scale { index: j, mean, std });
        }
        Ok(Standardizer {
            n_in: x.cols(),
            columns,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.columns.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.columns.iter().map(|c| match *c {
            Column::Scale { index, mean, std } => (row[index] - mean) / std,
            Column::Pass { index } => row[index],
        }));
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_in {
            return Err(Error::FeatureMismatch {
                expected: self.n_in,
                got: x.cols(),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * self.n_out());
        let mut buf = Vec::with_capacity(self.n_out());
        for row in x.iter_rows() {
            self.transform_row(row, &mut buf);
            data.extend_from_slice(&buf);
        }
        Matrix::new(x.rows(), self.n_out(), data)
    }

    /// Maps coefficients fitted on scaled columns back to raw input units.
    /// Returns (per-input-column slope, intercept adjustment).
    pub fn unscale_linear(&self, weights: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let mut raw = vec![0.0; self.n_in];
        let mut b = intercept;
        for (c, &w) in self.columns.iter().zip(weights) {
            match *c {
                Column::Scale { index, mean, std } => {
                    raw[index] = w / std;
                    b -= w * mean / std;
                }
                Column::Pass { index } => raw[index] = w,
            }
        }
        (raw, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_and_drops_constant_columns() {
        let x = Matrix::from_rows(&[[1.0, 5.0, 0.0], [3.0, 5.0, 1.0]]).unwrap();
        let s = Standardizer::fit(&x, &[false, false, true]).unwrap();
        assert_eq!(s.n_out(), 2);
        let t = s.transform(&x).unwrap();
        assert_eq!(t.row(0), &[-1.0, 0.0]);
        assert_eq!(t.row(1), &[1.0, 1.0]);
    }

    #[test]
    fn mismatch_is_reported() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 3.0]]).unwrap();
        let s = Standardizer::fit(&x, &[]).unwrap();
        let bad = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(s.transform(&bad), Err(Error::FeatureMismatch { .. })));
    }
}
