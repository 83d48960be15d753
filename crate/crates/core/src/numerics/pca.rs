use serde::{Deserialize, Serialize};

use super::linalg::{dot, symmetric_eigen, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Principal components truncated at a cumulative explained-variance threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PcaModel<T: Scalar> {
    pub mean: Vec<T>,
    /// K×D, orthonormal rows.
    pub components: Matrix<T>,
    /// Non-increasing, one per retained component.
    pub explained_variance: Vec<T>,
    pub total_variance: T,
    pub variance_fraction_retained: T,
    pub variance_threshold: T,
}

impl<T: Scalar> PcaModel<T> {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// `components · (x − mean)`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: x.len() });
        }
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.components.row_iter().map(|c| dot(c, &centered)).collect())
    }

    pub fn project_rows(&self, rows: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(rows.rows(), self.n_components());
        for (i, r) in rows.row_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&self.project(r)?);
        }
        Ok(out)
    }

    /// Maps projected coordinates back into the input space.
    pub fn reconstruct(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.n_components() {
            return Err(Error::DimensionMismatch { expected: self.n_components(), actual: z.len() });
        }
        let mut x = self.mean.clone();
        for (coef, comp) in z.iter().zip(self.components.row_iter()) {
            for (xi, &ci) in x.iter_mut().zip(comp) {
                *xi += *coef * ci;
            }
        }
        Ok(x)
    }

    /// Variance left outside the retained subspace.
    pub fn residual_variance(&self) -> T {
        self.total_variance - self.explained_variance.iter().copied().sum::<T>()
    }
}

/// Fits PCA on `rows` (N×D) and keeps the smallest number of leading components whose
/// cumulative explained variance reaches `variance_threshold`.
///
/// The covariance matrix is decomposed directly when N > D; otherwise the N×N Gram
/// matrix of the centered data is decomposed and mapped back to input space.
pub fn fit_pca<T: Scalar>(rows: &Matrix<T>, variance_threshold: T) -> Result<PcaModel<T>> {
    let (n, d) = (rows.rows(), rows.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {n}")));
    }
    if !(variance_threshold > T::zero() && variance_threshold <= T::one()) {
        return Err(Error::InvalidArgument(format!("variance threshold {variance_threshold} outside (0, 1]")));
    }
    if !rows.is_finite() {
        return Err(Error::InvalidArgument("PCA input contains non-finite values".into()));
    }

    let nf = T::of(n as f64);
    let mut mean = vec![T::zero(); d];
    for r in rows.row_iter() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let centered = Matrix::from_fn(n, d, |i, j| rows[(i, j)] - mean[j]);
    let denom = T::of((n - 1) as f64);

    let (mut values, mut vectors) = if n > d {
        let mut cov = centered.transpose().matmul(&centered)?;
        for v in cov.as_mut_slice() {
            *v /= denom;
        }
        symmetrize(&mut cov);
        let eig = symmetric_eigen(&cov)?;
        (eig.values, eig.vectors)
    } else {
        let mut gram = centered.matmul(&centered.transpose())?;
        for v in gram.as_mut_slice() {
            *v /= denom;
        }
        symmetrize(&mut gram);
        let eig = symmetric_eigen(&gram)?;
        let ct = centered.transpose();
        let mut vecs = Matrix::zeros(eig.values.len(), d);
        for (k, &lambda) in eig.values.iter().enumerate() {
            if lambda <= T::zero() {
                continue;
            }
            let mapped = ct.mul_vec(eig.vectors.row(k))?;
            let norm = dot(&mapped, &mapped).sqrt();
            if norm > T::zero() {
                for (dst, v) in vecs.row_mut(k).iter_mut().zip(mapped) {
                    *dst = v / norm;
                }
            }
        }
        (eig.values, vecs)
    };

    for v in &mut values {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let total: T = values.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::ZeroTotalVariance);
    }

    let mut cumulative = T::zero();
    let mut k = values.len();
    for (i, &v) in values.iter().enumerate() {
        cumulative += v;
        if cumulative / total >= variance_threshold {
            k = i + 1;
            break;
        }
    }
    let retained: T = values[..k].iter().copied().sum();

    for i in 0..k {
        orient(vectors.row_mut(i));
    }
    values.truncate(k);
    Ok(PcaModel {
        mean,
        components: vectors.truncate_rows(k),
        explained_variance: values,
        total_variance: total,
        variance_fraction_retained: retained / total,
        variance_threshold,
    })
}

fn symmetrize<T: Scalar>(m: &mut Matrix<T>) {
    let n = m.rows();
    let half = T::of(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn orient<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < T::zero()) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
