//! Numerical primitives: dense matrices, symmetric eigendecomposition, PCA,
//! z-score standardization and Shannon entropy.

mod entropy;
mod linalg;
mod pca;
mod standardize;

pub use entropy::shannon_entropy_nat;
pub use linalg::{symmetric_eigen, Matrix, SymmetricEigen};
pub use pca::{fit_pca, PcaModel};
pub use standardize::{fit_standardizer, Standardizer, STD_FLOOR};
