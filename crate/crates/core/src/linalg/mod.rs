//! Sparse and dense matrix kernels.
//!
//! Only what the hierarchical loss and the reconciliation baselines need:
//! canonical CSR construction, sparse-dense and sparse-sparse products,
//! transposition, row reductions and diagonal scaling.

mod csr;
mod dense;

pub use csr::SparseMatrix;
pub use dense::DenseMatrix;
