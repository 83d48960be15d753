use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// A T×D labeled time series; row τ is the feature vector at step τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MultiSeries<T: Scalar> {
    values: Matrix<T>,
    dim_labels: Vec<String>,
}

impl<T: Scalar> MultiSeries<T> {
    pub fn new(values: Matrix<T>, dim_labels: Vec<String>) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::InvalidArgument("series must have at least one step".into()));
        }
        if values.cols() != dim_labels.len() {
            return Err(Error::DimensionMismatch { expected: dim_labels.len(), actual: values.cols() });
        }
        if !values.is_finite() {
            return Err(Error::InvalidArgument("series contains non-finite values".into()));
        }
        Ok(Self { values, dim_labels })
    }

    /// Unlabeled series from rows; columns are named `x0`, `x1`, ….
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let values = Matrix::from_rows(rows)?;
        let labels = (0..values.cols()).map(|i| format!("x{i}")).collect();
        Self::new(values, labels)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn step(&self, t: usize) -> &[T] {
        self.values.row(t)
    }

    pub fn steps(&self) -> impl Iterator<Item = &[T]> {
        self.values.row_iter()
    }

    pub fn dim_labels(&self) -> &[String] {
        &self.dim_labels
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: bad + 1 });
        }
        Self::new(
            self.values.select_columns(columns),
            columns.iter().map(|&c| self.dim_labels[c].clone()).collect(),
        )
    }

    /// Replaces every row by `f(row)`; labels are kept.
    pub fn map_rows(&self, mut f: impl FnMut(&[T]) -> Result<Vec<T>>) -> Result<Self> {
        let mut out = self.values.clone();
        for i in 0..self.len() {
            let row = f(self.values.row(i))?;
            if row.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), actual: row.len() });
            }
            out.row_mut(i).copy_from_slice(&row);
        }
        Self::new(out, self.dim_labels.clone())
    }
}
