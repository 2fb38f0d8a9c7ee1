//! Class balancing, outlier removal and feature scaling.

mod outliers;
mod oversample;
mod scaling;

pub use outliers::{
    em, flag_outliers, kmeans, remove_outliers, ClusterInit, ClusterOutcome, OutlierMethod,
    OutlierSplit, COVARIANCE_REG,
};
pub use oversample::{oversample, oversample_indices};
pub use scaling::Standardizer;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::seed::derive_seed;

/// Training-set preprocessing, applied in this order: outlier removal, then
/// oversampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocessing {
    pub outlier_removal: Option<OutlierMethod>,
    /// Oversampling only applies to classification.
    pub oversample: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Preprocessing {
            outlier_removal: None,
            oversample: true,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepSummary {
    pub input_rows: usize,
    pub outliers_removed: usize,
    pub oversampled_rows: usize,
    pub output_rows: usize,
}

impl Preprocessing {
    pub fn apply(&self, train: &Dataset, classification: bool, seed: u64) -> Result<(Dataset, PrepSummary)> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut summary = PrepSummary {
            input_rows: train.len(),
            ..PrepSummary::default()
        };
        let mut data = match self.outlier_removal {
            Some(method) => {
                let split = remove_outliers(train, method, self.max_iter, self.tol)?;
                if !split.converged {
                    warn!("{method:?} outlier clustering stopped after {} iterations", split.iterations);
                }
                let (buy, wait) = split.kept.class_counts();
                if buy == 0 || wait == 0 {
                    warn!("outlier removal would leave a single class; keeping all rows");
                    train.clone()
                } else {
                    summary.outliers_removed = split.removed.len();
                    split.kept
                }
            }
            None => train.clone(),
        };
        if classification && self.oversample {
            let before = data.len();
            data = oversample(&data, derive_seed(seed, &["oversample"]))?;
            summary.oversampled_rows = data.len() - before;
        }
        summary.output_rows = data.len();
        Ok((data, summary))
    }
}
