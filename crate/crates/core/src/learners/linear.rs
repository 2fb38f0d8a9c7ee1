use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::Standardizer;

const RIDGE_JITTER: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 3;

/// Ordinary least squares on standardized features.
///
/// Solves the normal equations with `1e-8` ridge jitter on the slope block,
/// followed by a few steps of iterative refinement against the unjittered
/// system so the jitter does not bias well-conditioned fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares {
    scaler: Standardizer,
    weights: Vec<f64>,
    intercept: f64,
}

impl LeastSquares {
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<(Self, f64)> {
        let scaler = Standardizer::fit(x, &[])?;
        let z = scaler.transform(x)?;
        let n = z.rows();
        let p = z.cols() + 1;

        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        let mut row = vec![0.0; p];
        for (zr, &t) in z.iter_rows().zip(y) {
            row[0] = 1.0;
            row[1..].copy_from_slice(zr);
            for i in 0..p {
                b[i] += row[i] * t;
                for j in i..p {
                    a[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
        let mut jittered = a.clone();
        for i in 1..p {
            jittered[(i, i)] += RIDGE_JITTER;
        }
        let chol = jittered
            .cholesky()
            .ok_or_else(|| Error::IncompatibleSpec("normal equations are not positive definite".into()))?;
        let mut coef = chol.solve(&b);
        for _ in 0..REFINEMENT_STEPS {
            let residual = &b - &a * &coef;
            coef += chol.solve(&residual);
        }

        let model = LeastSquares {
            scaler,
            intercept: coef[0],
            weights: coef.iter().skip(1).copied().collect(),
        };
        let sse: f64 = z
            .iter_rows()
            .zip(y)
            .map(|(r, &t)| (model.predict_scaled(r) - t).powi(2))
            .sum();
        Ok((model, (sse / n.max(1) as f64).sqrt()))
    }

    fn predict_scaled(&self, z: &[f64]) -> f64 {
        self.intercept + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64], buf: &mut Vec<f64>) -> f64 {
        self.scaler.transform_row(row, buf);
        self.predict_scaled(buf)
    }

    /// Slopes per raw input column and intercept, in raw units.
    pub fn coefficients(&self) -> (Vec<f64>, f64) {
        self.scaler.unscale_linear(&self.weights, self.intercept)
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_in()
    }
}
