use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shannon entropy in nats, `−Σ pᵢ ln pᵢ` with `0 · ln 0 = 0`.
///
/// `p` must be a distribution: entries in [0, 1] summing to one within 1e-6.
pub fn shannon_entropy_nat<T: Scalar>(p: &[T]) -> Result<T> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    if p.iter().any(|&x| !x.is_finite() || x < T::zero() || x > T::one()) {
        return Err(Error::InvalidDistribution(format!("entries outside [0, 1]: {p:?}")));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::of(1e-6) {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    let h = p
        .iter()
        .filter(|&&x| x > T::zero())
        .fold(T::zero(), |acc, &x| acc - x * x.ln());
    Ok(h.max(T::zero()))
}
