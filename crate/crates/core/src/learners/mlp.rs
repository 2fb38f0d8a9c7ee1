//! Three-layer perceptron: input, one tanh hidden layer, output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::preprocess::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// Identity output, half squared loss.
    Linear,
    /// Sigmoid output, binary cross-entropy.
    Sigmoid,
}

/// Network weights in one flat vector: `w1 (hidden × n_in) | b1 | w2 | b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub n_in: usize,
    pub hidden: usize,
    pub output: Output,
    pub params: Vec<f64>,
}

impl MlpNet {
    pub fn new(n_in: usize, hidden: usize, output: Output, rng: &mut impl Rng) -> Self {
        let n = hidden * n_in + hidden + hidden + 1;
        let mut params = vec![0.0; n];
        let a1 = (6.0 / (n_in + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        for p in &mut params[..hidden * n_in] {
            *p = rng.random_range(-a1..a1);
        }
        let w2 = hidden * n_in + hidden;
        for p in &mut params[w2..w2 + hidden] {
            *p = rng.random_range(-a2..a2);
        }
        MlpNet {
            n_in,
            hidden,
            output,
            params,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.n_in;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden;
        (b1, w2, b2)
    }

    /// Pre-activation of the output unit; fills `h` with hidden activations.
    fn forward(&self, x: &[f64], h: &mut [f64]) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for j in 0..self.hidden {
            let w = &p[j * self.n_in..(j + 1) * self.n_in];
            let a = p[b1 + j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            h[j] = a.tanh();
        }
        p[b2] + h.iter().zip(&p[w2..w2 + self.hidden]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn output_row(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let o = self.forward(x, &mut h);
        match self.output {
            Output::Linear => o,
            Output::Sigmoid => sigmoid(o),
        }
    }

    /// Mean loss over the given rows and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut h = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for &i in rows {
            let xi = x.row(i);
            let o = self.forward(xi, &mut h);
            let t = y[i];
            // dL/do for both output kinds.
            let delta = match self.output {
                Output::Linear => {
                    loss += 0.5 * (o - t).powi(2);
                    o - t
                }
                Output::Sigmoid => {
                    let s = sigmoid(o);
                    let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                    loss += t * softplus(-o) + (1.0 - t) * softplus(o);
                    s - t
                }
            };
            grad[b2] += delta;
            for j in 0..self.hidden {
                grad[w2 + j] += delta * h[j];
                let dh = delta * self.params[w2 + j] * (1.0 - h[j] * h[j]);
                grad[b1 + j] += dh;
                let g = &mut grad[j * self.n_in..(j + 1) * self.n_in];
                for (gk, xk) in g.iter_mut().zip(xi) {
                    *gk += dh * xk;
                }
            }
        }
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    scaler: Standardizer,
    net: MlpNet,
    y_mean: f64,
    y_std: f64,
}

impl Mlp {
    /// Mini-batch gradient descent; returns the model and per-epoch mean loss.
    pub fn fit(x: &Matrix, y: &[f64], output: Output, params: MlpParams, seed: u64) -> Result<(Self, Vec<f64>)> {
        let scaler = Standardizer::fit(x, &[])?;
        let z = scaler.transform(x)?;
        let (y_mean, y_std) = match output {
            Output::Sigmoid => (0.0, 1.0),
            Output::Linear => {
                let n = y.len() as f64;
                let m = y.iter().sum::<f64>() / n;
                let s = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                (m, if s > 0.0 { s } else { 1.0 })
            }
        };
        let targets: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MlpNet::new(z.cols(), params.hidden.max(1), output, &mut rng);
        let mut order: Vec<usize> = (0..z.rows()).collect();
        let mut trace = Vec::with_capacity(params.epochs);
        let batch = params.batch_size.max(1);

        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let (loss, grad) = net.loss_and_grad(&z, &targets, chunk);
                epoch_loss += loss * chunk.len() as f64;
                for (p, g) in net.params.iter_mut().zip(&grad) {
                    *p -= params.learning_rate * g;
                }
            }
            trace.push(epoch_loss / z.rows().max(1) as f64);
        }
        Ok((
            Mlp {
                scaler,
                net,
                y_mean,
                y_std,
            },
            trace,
        ))
    }

    pub fn predict_row(&self, row: &[f64], buf: &mut Vec<f64>) -> f64 {
        self.scaler.transform_row(row, buf);
        let o = self.net.output_row(buf);
        match self.net.output {
            Output::Linear => o * self.y_std + self.y_mean,
            Output::Sigmoid => o,
        }
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_in()
    }
}
