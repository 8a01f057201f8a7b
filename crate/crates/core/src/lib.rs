pub mod bench;
pub mod cli;
pub mod error;
pub mod gbdt;
pub mod hierarchy;
pub mod hloss;
pub mod objective;
pub mod pipeline;
pub mod reconcile;
pub mod linalg;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SparseMatrix};
