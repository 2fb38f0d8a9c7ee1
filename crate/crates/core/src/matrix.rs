//! Dense row-major design matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FeatureRow, NUM_FEATURES, NUM_ROUTES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::FeatureMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            data,
            rows: rows.len(),
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in self.iter_rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        Matrix {
            data,
            rows: self.rows,
            cols: cols.len(),
        }
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }
}

/// Training input for a learner: features, targets, column kinds and route groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// Columns left unscaled by distance-based learners (the flight dummies).
    pub categorical: Vec<bool>,
    /// Specific-route index of each row, used by uniform blending.
    pub groups: Vec<Option<usize>>,
}

impl Design {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::InvalidConfig(format!(
                "{} feature rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        let categorical = vec![false; x.cols()];
        let groups = vec![None; x.rows()];
        Ok(Design {
            x,
            y,
            categorical,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Design {
        Design {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            categorical: self.categorical.clone(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
        }
    }
}

/// Feature matrix of a row slice in [`FeatureRow::features`] layout.
pub fn feature_matrix(rows: &[FeatureRow]) -> Matrix {
    let mut data = Vec::with_capacity(rows.len() * NUM_FEATURES);
    for r in rows {
        data.extend_from_slice(&r.features());
    }
    Matrix {
        data,
        rows: rows.len(),
        cols: NUM_FEATURES,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Class,
    MinPrice,
}

impl Dataset {
    pub fn design(&self, target: Target) -> Design {
        let y = self
            .rows
            .iter()
            .map(|r| match target {
                Target::Class => f64::from(r.label_class),
                Target::MinPrice => r.label_reg.as_f64(),
            })
            .collect();
        let mut categorical = vec![false; NUM_FEATURES];
        categorical[..NUM_ROUTES].fill(true);
        Design {
            x: feature_matrix(&self.rows),
            y,
            categorical,
            groups: self.rows.iter().map(FeatureRow::route_index).collect(),
        }
    }
}
