//! Outlier removal by two-cluster K-Means or Gaussian-mixture EM, with each
//! cluster initialized at the mean of one labelled class.
//!
//! Cluster `k` starts at the mean of the rows labelled `k` (0 = wait, 1 = buy),
//! which fixes the cluster-to-class identification. A row is an outlier when
//! the cluster it ends up in differs from its label.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Dataset, NUM_CONTINUOUS};
use crate::preprocess::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMethod {
    Kmeans,
    Em,
}

/// Diagonal loading added to every EM covariance estimate.
pub const COVARIANCE_REG: f64 = 1e-6;

/// Class-conditional cluster initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInit {
    pub centers: [Vec<f64>; 2],
    pub counts: [usize; 2],
}

impl ClusterInit {
    pub fn from_labels(points: &Matrix, labels: &[u8]) -> Result<Self> {
        let d = points.cols();
        let mut sums = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (row, &label) in points.iter_rows().zip(labels) {
            let k = usize::from(label == 1);
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(row) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            return Err(Error::SingleClassDataset);
        }
        for (sum, &n) in sums.iter_mut().zip(&counts) {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        Ok(ClusterInit {
            centers: sums,
            counts,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    /// Final cluster of each point.
    pub assignment: Vec<u8>,
    pub outlier: Vec<bool>,
    /// K-Means objective or EM objective after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(row: &[f64], centers: &[Vec<f64>; 2]) -> (u8, f64) {
    let d0 = sq_dist(row, &centers[0]);
    let d1 = sq_dist(row, &centers[1]);
    if d1 < d0 {
        (1, d1)
    } else {
        (0, d0)
    }
}

/// Lloyd iterations from the class means. Stops once no center moves by `tol` or more.
pub fn kmeans(points: &Matrix, labels: &[u8], max_iter: usize, tol: f64) -> Result<ClusterOutcome> {
    let mut centers = ClusterInit::from_labels(points, labels)?.centers;
    let d = points.cols();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut assignment = vec![0u8; points.rows()];

    while iterations < max_iter {
        iterations += 1;
        let mut objective = 0.0;
        let mut sums = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (i, row) in points.iter_rows().enumerate() {
            let (k, dist) = nearest(row, &centers);
            assignment[i] = k;
            objective += dist;
            counts[usize::from(k)] += 1;
            for (s, v) in sums[usize::from(k)].iter_mut().zip(row) {
                *s += v;
            }
        }
        trace.push(objective);

        let mut movement: f64 = 0.0;
        for k in 0..2 {
            if counts[k] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            movement = movement.max(sq_dist(&new, &centers[k]).sqrt());
            centers[k] = new;
        }
        if movement < tol {
            converged = true;
            break;
        }
    }

    for (i, row) in points.iter_rows().enumerate() {
        assignment[i] = nearest(row, &centers).0;
    }
    if !converged {
        warn!("k-means hit max_iter={max_iter} before convergence");
    }
    Ok(finish(assignment, labels, trace, iterations, converged))
}

struct Component {
    log_weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    // Cached from `cov`.
    chol_l: DMatrix<f64>,
    log_det: f64,
    trace_inv: f64,
}

impl Component {
    fn new(log_weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let mut jitter = 0.0;
        let mut cov = cov;
        let chol = loop {
            if let Some(c) = cov.clone().cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 { COVARIANCE_REG } else { jitter * 10.0 };
            for i in 0..cov.nrows() {
                cov[(i, i)] += jitter;
            }
        };
        let chol_l = chol.l();
        let log_det = 2.0 * chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let trace_inv = chol.inverse().trace();
        Component {
            log_weight,
            mean,
            cov,
            chol_l,
            log_det,
            trace_inv,
        }
    }

    /// log π + log N(x | μ, Σ) − (λ/2)·tr(Σ⁻¹)
    fn log_joint(&self, x: &DVector<f64>) -> f64 {
        let d = x.len() as f64;
        let diff = x - &self.mean;
        let z = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is non-singular");
        self.log_weight
            - 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det + z.norm_squared())
            - 0.5 * COVARIANCE_REG * self.trace_inv
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Two-component full-covariance Gaussian mixture fitted by EM.
///
/// Means start at the class means, covariances start spherical at the pooled
/// per-dimension variance, weights at the class proportions. Each M-step
/// covariance receives `COVARIANCE_REG` on its diagonal. The traced objective
/// is the log-likelihood of the mixture whose component weights carry the
/// matching `exp(−λ/2·tr Σ⁻¹)` factor, for which this update is an exact EM
/// step, so the trace is non-decreasing. Stops when the objective changes by
/// less than `tol·max(1, |objective|)`.
pub fn em(points: &Matrix, labels: &[u8], max_iter: usize, tol: f64) -> Result<ClusterOutcome> {
    let init = ClusterInit::from_labels(points, labels)?;
    let n = points.rows();
    let d = points.cols();
    let xs: Vec<DVector<f64>> = points
        .iter_rows()
        .map(DVector::from_column_slice)
        .collect();

    let grand: DVector<f64> = xs.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n as f64;
    let pooled_var = xs.iter().map(|x| (x - &grand).norm_squared()).sum::<f64>() / (n * d) as f64;
    let spherical = DMatrix::identity(d, d) * (pooled_var.max(COVARIANCE_REG));

    let mut comps: Vec<Component> = (0..2)
        .map(|k| {
            Component::new(
                (init.counts[k] as f64 / n as f64).ln(),
                DVector::from_column_slice(&init.centers[k]),
                spherical.clone(),
            )
        })
        .collect();

    let mut trace = Vec::new();
    let mut resp = vec![[0.0f64; 2]; n];
    let mut converged = false;
    let mut iterations = 0;

    let e_step = |comps: &[Component], resp: &mut [[f64; 2]]| -> f64 {
        let mut ll = 0.0;
        for (x, r) in xs.iter().zip(resp.iter_mut()) {
            let a = comps[0].log_joint(x);
            let b = comps[1].log_joint(x);
            let z = log_sum_exp(a, b);
            *r = [(a - z).exp(), (b - z).exp()];
            ll += z;
        }
        ll
    };

    let mut ll = e_step(&comps, &mut resp);
    trace.push(ll);

    while iterations < max_iter {
        iterations += 1;
        for k in 0..2 {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk < 1e-10 {
                comps[k].log_weight = f64::NEG_INFINITY;
                continue;
            }
            let mean = xs
                .iter()
                .zip(&resp)
                .fold(DVector::zeros(d), |acc, (x, r)| acc + x * r[k])
                / nk;
            let mut cov = DMatrix::zeros(d, d);
            for (x, r) in xs.iter().zip(&resp) {
                let diff = x - &mean;
                cov += (&diff * diff.transpose()) * r[k];
            }
            cov /= nk;
            for i in 0..d {
                cov[(i, i)] += COVARIANCE_REG;
            }
            comps[k] = Component::new((nk / n as f64).ln(), mean, cov);
        }
        let next = e_step(&comps, &mut resp);
        trace.push(next);
        let delta = next - ll;
        ll = next;
        if delta.abs() < tol * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("EM hit max_iter={max_iter} before convergence");
    }
    // Covariances are only read through the cached factorization.
    debug_assert!(comps.iter().all(|c| c.cov.nrows() == d));

    let assignment = resp.iter().map(|r| u8::from(r[1] > r[0])).collect();
    Ok(finish(assignment, labels, trace, iterations, converged))
}

fn finish(
    assignment: Vec<u8>,
    labels: &[u8],
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> ClusterOutcome {
    let outlier = assignment.iter().zip(labels).map(|(a, &l)| *a != u8::from(l == 1)).collect();
    ClusterOutcome {
        assignment,
        outlier,
        trace,
        iterations,
        converged,
    }
}

/// Flags rows whose cluster disagrees with their label.
pub fn flag_outliers(
    points: &Matrix,
    labels: &[u8],
    method: OutlierMethod,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterOutcome> {
    match method {
        OutlierMethod::Kmeans => kmeans(points, labels, max_iter, tol),
        OutlierMethod::Em => em(points, labels, max_iter, tol),
    }
}

#[derive(Debug, Clone)]
pub struct OutlierSplit {
    pub kept: Dataset,
    pub removed: Dataset,
    pub converged: bool,
    pub iterations: usize,
}

/// Clusters the standardized continuous features and splits off disagreeing rows.
pub fn remove_outliers(
    train: &Dataset,
    method: OutlierMethod,
    max_iter: usize,
    tol: f64,
) -> Result<OutlierSplit> {
    let continuous: Vec<[f64; NUM_CONTINUOUS]> = train.rows.iter().map(|r| r.continuous()).collect();
    let raw = Matrix::from_rows(&continuous)?;
    if raw.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let scaled = Standardizer::fit(&raw, &[])?.transform(&raw)?;
    let labels: Vec<u8> = train.rows.iter().map(|r| r.label_class).collect();
    let outcome = flag_outliers(&scaled, &labels, method, max_iter, tol)?;

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (row, &out) in train.rows.iter().zip(&outcome.outlier) {
        if out {
            removed.push(row.clone());
        } else {
            kept.push(row.clone());
        }
    }
    Ok(OutlierSplit {
        kept: Dataset::new(kept, train.role),
        removed: Dataset::new(removed, train.role),
        converged: outcome.converged,
        iterations: outcome.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Two blobs (σ = 0.1, centers 10 apart) with a planted set of swapped labels.
    fn planted(seed: u64) -> (Matrix, Vec<u8>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut swapped = Vec::new();
        for i in 0..400 {
            let blob = u8::from(i >= 200);
            let cx = if blob == 1 { 10.0 } else { 0.0 };
            rows.push([cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
            let flip = i % 20 == 7;
            labels.push(if flip { 1 - blob } else { blob });
            swapped.push(flip);
        }
        (Matrix::from_rows(&rows).unwrap(), labels, swapped)
    }

    fn recall(outcome: &ClusterOutcome, planted: &[bool]) -> f64 {
        let hits = outcome.outlier.iter().zip(planted).filter(|(o, p)| **o && **p).count();
        hits as f64 / planted.iter().filter(|p| **p).count() as f64
    }

    #[test]
    fn kmeans_recovers_planted_mislabels() {
        let (x, labels, swapped) = planted(3);
        let out = kmeans(&x, &labels, 100, 1e-9).unwrap();
        assert!(out.converged);
        assert!(recall(&out, &swapped) >= 0.95);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn em_recovers_planted_mislabels() {
        let (x, labels, swapped) = planted(4);
        let out = em(&x, &labels, 200, 1e-10).unwrap();
        assert!(recall(&out, &swapped) >= 0.95);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{:?}", out.trace);
    }

    #[test]
    fn clean_labels_remove_nothing() {
        let (x, _, _) = planted(5);
        let clean: Vec<u8> = (0..400).map(|i| u8::from(i >= 200)).collect();
        for method in [OutlierMethod::Kmeans, OutlierMethod::Em] {
            let out = flag_outliers(&x, &clean, method, 100, 1e-9).unwrap();
            assert!(out.outlier.iter().all(|o| !o));
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(kmeans(&x, &[1, 1], 10, 1e-6), Err(Error::SingleClassDataset)));
    }

    #[test]
    fn kmeans_tie_goes_to_lower_cluster() {
        assert_eq!(nearest(&[0.5], &[vec![0.0], vec![1.0]]).0, 0);
    }
}
