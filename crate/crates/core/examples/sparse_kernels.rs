//! CSR kernels on summing matrices: products with dense panels, transposes,
//! row and column sums, and the sparsity of the M5-shaped hierarchy.

use hiercast::bench::m5_shaped_hierarchy;
use hiercast::{DenseMatrix, SparseMatrix};

fn main() -> hiercast::Result<()> {
    // total over three series plus a two-series group
    let rows = [0, 0, 0, 1, 1, 2, 3, 4];
    let cols = [0, 1, 2, 0, 1, 0, 1, 2];
    let s = SparseMatrix::from_triplets(&rows, &cols, &[1.0; 8], (5, 3))?;
    let bottom = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])?;
    let all = s.spmm_dense(&bottom)?;
    for i in 0..all.n_rows() {
        println!("row {i}: {:?}", all.row(i));
    }
    println!("row sums {:?}", s.row_sums());
    println!("column sums {:?}", s.col_sums());
    println!("S^T S = {:?}", s.transpose().spmm_sparse(&s)?.to_dense().values());

    let h = m5_shaped_hierarchy()?;
    println!(
        "M5 layout: n = {}, n_b = {}, levels = {}, nnz = {}, sparsity = {:.5}",
        h.n(),
        h.n_b(),
        h.n_levels(),
        h.s().nnz(),
        h.s().sparsity()
    );
    Ok(())
}
