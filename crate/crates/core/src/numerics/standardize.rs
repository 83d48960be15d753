use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Standard deviations below this are floored; such dimensions map to zero.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Scalar> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

/// Fits per-column mean and population standard deviation.
pub fn fit_standardizer<T: Scalar>(rows: &Matrix<T>) -> Standardizer<T> {
    let (n, d) = (rows.rows(), rows.cols());
    let nf = T::of(n.max(1) as f64);
    let mut mean = vec![T::zero(); d];
    for r in rows.row_iter() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let mut var = vec![T::zero(); d];
    for r in rows.row_iter() {
        for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let floor = T::of(STD_FLOOR);
    let std = var.into_iter().map(|s| (s / nf).sqrt().max(floor)).collect();
    Standardizer { mean, std }
}

impl<T: Scalar> Standardizer<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Identity transform over `dim` columns.
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![T::zero(); dim], std: vec![T::one(); dim] }
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        let floor = T::of(STD_FLOOR);
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&v, &m), &s)| if s <= floor { T::zero() } else { (v - m) / s })
            .collect())
    }

    pub fn apply_rows(&self, rows: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = rows.clone();
        for i in 0..rows.rows() {
            let z = self.apply(rows.row(i))?;
            out.row_mut(i).copy_from_slice(&z);
        }
        Ok(out)
    }

    /// Restriction to a subset of columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: bad + 1 });
        }
        Ok(Self {
            mean: columns.iter().map(|&c| self.mean[c]).collect(),
            std: columns.iter().map(|&c| self.std[c]).collect(),
        })
    }
}
