use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::preprocess::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    scaler: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticParams {
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy and its gradient (bias last).
fn loss_grad(z: &Matrix, y: &[f64], w: &[f64], b: f64, want_grad: bool) -> (f64, Vec<f64>) {
    let n = z.rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len() + 1];
    for (row, &t) in z.iter_rows().zip(y) {
        let s = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        // t·softplus(−s) + (1 − t)·softplus(s)
        loss += t * softplus(-s) + (1.0 - t) * softplus(s);
        if want_grad {
            let r = sigmoid(s) - t;
            for (g, a) in grad.iter_mut().zip(row) {
                *g += r * a;
            }
            *grad.last_mut().expect("bias slot") += r;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

impl Logistic {
    /// Full-batch gradient descent with Armijo backtracking, so the training
    /// loss never increases. Returns the model and the per-epoch loss trace.
    pub fn fit(x: &Matrix, y: &[f64], params: LogisticParams) -> Result<(Self, Vec<f64>)> {
        let scaler = Standardizer::fit(x, &[])?;
        let z = scaler.transform(x)?;
        let mut w = vec![0.0; z.cols()];
        let mut b = 0.0;
        let mut step = params.initial_step;
        let (mut loss, mut grad) = loss_grad(&z, y, &w, b, true);
        let mut trace = vec![loss];

        for _ in 0..params.max_epochs {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < params.grad_tol {
                break;
            }
            step *= 2.0;
            let (nw, nb, nloss) = loop {
                let nw: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let nb = b - step * grad[grad.len() - 1];
                let (nloss, _) = loss_grad(&z, y, &nw, nb, false);
                if nloss <= loss - 0.5 * step * gnorm2 || step < 1e-12 {
                    break (nw, nb, nloss);
                }
                step *= 0.5;
            };
            if nloss > loss {
                break;
            }
            w = nw;
            b = nb;
            let (l, g) = loss_grad(&z, y, &w, b, true);
            debug_assert!((l - nloss).abs() <= 1e-12 * l.abs().max(1.0));
            loss = l;
            grad = g;
            trace.push(loss);
        }
        Ok((
            Logistic {
                scaler,
                weights: w,
                bias: b,
            },
            trace,
        ))
    }

    pub fn score_row(&self, row: &[f64], buf: &mut Vec<f64>) -> f64 {
        self.scaler.transform_row(row, buf);
        sigmoid(self.bias + buf.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>())
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_in()
    }
}
