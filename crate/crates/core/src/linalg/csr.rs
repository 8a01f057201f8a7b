use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix of `f64`.
///
/// Always canonical: column indices strictly increase within a row and no
/// explicit zeros are stored, so two matrices with the same entries compare
/// equal with `==`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCsr")]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCsr {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<RawCsr> for SparseMatrix {
    type Error = Error;

    fn try_from(raw: RawCsr) -> Result<Self> {
        SparseMatrix::from_csr_parts(
            raw.n_rows,
            raw.n_cols,
            raw.row_offsets,
            raw.col_indices,
            raw.values,
        )
    }
}

impl SparseMatrix {
    /// Builds a canonical matrix from coordinate triplets. Duplicates are
    /// summed and entries that end up zero are dropped.
    pub fn from_triplets(
        rows: &[usize],
        cols: &[usize],
        vals: &[f64],
        shape: (usize, usize),
    ) -> Result<Self> {
        let (n_rows, n_cols) = shape;
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(Error::shape(
                format!("{} row/col/value entries", rows.len()),
                format!("{} cols and {} values", cols.len(), vals.len()),
            ));
        }
        for (&r, &c) in rows.iter().zip(cols) {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfBounds {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }

        // counting sort by row, then sort each row's slice by column
        let mut counts = vec![0usize; n_rows + 1];
        for &r in rows {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); rows.len()];
        for ((&r, &c), &v) in rows.iter().zip(cols).zip(vals) {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        for i in 0..n_rows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_indices.push(c);
                    values.push(sum);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Wraps raw CSR arrays after checking every canonical-form invariant.
    pub fn from_csr_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("invalid CSR arrays: {msg}")));
        if row_offsets.len() != n_rows + 1 {
            return bad("row_offsets must have n_rows + 1 entries");
        }
        if row_offsets[0] != 0 || row_offsets[n_rows] != col_indices.len() {
            return bad("row_offsets must start at 0 and end at nnz");
        }
        if col_indices.len() != values.len() {
            return bad("col_indices and values differ in length");
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return bad("row_offsets must be non-decreasing");
            }
            for k in lo..hi {
                if col_indices[k] >= n_cols {
                    return bad("column index out of range");
                }
                if k > lo && col_indices[k] <= col_indices[k - 1] {
                    return bad("column indices must strictly increase within a row");
                }
                if values[k] == 0.0 {
                    return bad("explicit zero stored");
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Diagonal matrix with the given entries (zeros are dropped).
    pub fn diag(v: &[f64]) -> Self {
        let idx: Vec<usize> = (0..v.len()).collect();
        Self::from_triplets(&idx, &idx, v, (v.len(), v.len()))
            .expect("diagonal indices are in bounds")
    }

    /// Converts a dense matrix, dropping zeros.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(m.n_rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..m.n_rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            n_rows: m.n_rows(),
            n_cols: m.n_cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Sparse times dense, `O(nnz(self) * rhs.n_cols())`.
    pub fn spmm_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != rhs.n_rows() {
            return Err(Error::shape(
                format!("rhs with {} rows", self.n_cols),
                format!("{} rows", rhs.n_rows()),
            ));
        }
        let width = rhs.n_cols();
        let mut out = DenseMatrix::zeros(self.n_rows, width);
        if width == 0 {
            return Ok(out);
        }
        out.values_mut()
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, out_row)| {
                let (cols, vals) = self.row(i);
                for (&k, &a) in cols.iter().zip(vals) {
                    for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                        *o += a * b;
                    }
                }
            });
        Ok(out)
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::shape(
                format!("vector of length {}", self.n_cols),
                format!("length {}", x.len()),
            ));
        }
        Ok((0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect())
    }

    /// Sparse times sparse (Gustavson's row-by-row algorithm).
    pub fn spmm_sparse(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::shape(
                format!("rhs with {} rows", self.n_cols),
                format!("{} rows", rhs.n_rows),
            ));
        }
        let mut acc = vec![0.0f64; rhs.n_cols];
        let mut touched = vec![false; rhs.n_cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.n_rows {
            let (a_cols, a_vals) = self.row(i);
            for (&k, &a) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = rhs.row(k);
                for (&j, &b) in b_cols.iter().zip(b_vals) {
                    if !touched[j] {
                        touched[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != 0.0 {
                    col_indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                touched[j] = false;
            }
            pattern.clear();
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: rhs.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        // rows are visited in increasing order, so each output row stays sorted
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (&j, &v) in self.col_indices.iter().zip(&self.values) {
            out[j] += v;
        }
        out
    }

    /// `A[i,j] * v[i]`; the sparsity pattern is unchanged.
    pub fn scale_rows(&self, v: &[f64]) -> Result<SparseMatrix> {
        if v.len() != self.n_rows {
            return Err(Error::shape(
                format!("{} row scales", self.n_rows),
                format!("{}", v.len()),
            ));
        }
        check_nonzero(v)?;
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[k] *= v[i];
            }
        }
        Ok(out)
    }

    /// `A[i,j] * v[j]`; the sparsity pattern is unchanged.
    pub fn scale_cols(&self, v: &[f64]) -> Result<SparseMatrix> {
        if v.len() != self.n_cols {
            return Err(Error::shape(
                format!("{} column scales", self.n_cols),
                format!("{}", v.len()),
            ));
        }
        check_nonzero(v)?;
        let mut out = self.clone();
        for (val, &j) in out.values.iter_mut().zip(&self.col_indices) {
            *val *= v[j];
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            out.set(i, j, v);
        }
        out
    }

    /// Fraction of entries that are structurally zero.
    pub fn sparsity(&self) -> f64 {
        let total = self.n_rows as f64 * self.n_cols as f64;
        if total == 0.0 {
            return 1.0;
        }
        1.0 - self.nnz() as f64 / total
    }

    /// Matrix Market coordinate dump with 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {}", i + 1, j + 1, v);
        }
        s
    }
}

impl DenseMatrix {
    /// Dense times sparse, `O(nnz(rhs) * self.n_rows())`.
    pub fn mul_sparse(&self, rhs: &SparseMatrix) -> Result<DenseMatrix> {
        if self.n_cols() != rhs.n_rows() {
            return Err(Error::shape(
                format!("rhs with {} rows", self.n_cols()),
                format!("{} rows", rhs.n_rows()),
            ));
        }
        let width = rhs.n_cols();
        let mut out = DenseMatrix::zeros(self.n_rows(), width);
        if width == 0 {
            return Ok(out);
        }
        out.values_mut()
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, out_row)| {
                for (k, &a) in self.row(i).iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let (cols, vals) = rhs.row(k);
                    for (&j, &b) in cols.iter().zip(vals) {
                        out_row[j] += a * b;
                    }
                }
            });
        Ok(out)
    }
}

fn check_nonzero(v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale entry {i} is {}; scales must be finite and nonzero",
            v[i]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_s() -> SparseMatrix {
        SparseMatrix::from_triplets(&[0, 0, 1, 2], &[0, 1, 0, 1], &[1.0; 4], (3, 2)).unwrap()
    }

    #[test]
    fn triplets_build_toy_summing_matrix() {
        let s = toy_s();
        assert_eq!(
            s.to_dense(),
            DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
        );
        assert_eq!(s.nnz(), 4);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let s = SparseMatrix::from_triplets(&[], &[], &[], (2, 2)).unwrap();
        assert_eq!(s.nnz(), 0);
        assert_eq!(s.to_dense(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let s = SparseMatrix::from_triplets(&[0, 0], &[0, 0], &[1.0, 2.0], (1, 1)).unwrap();
        assert_eq!(s.values(), &[3.0]);
        let z = SparseMatrix::from_triplets(&[0, 0], &[0, 0], &[1.0, -1.0], (1, 1)).unwrap();
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn out_of_bounds_triplet_is_rejected() {
        let err = SparseMatrix::from_triplets(&[3], &[0], &[1.0], (3, 2)).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfBounds { row: 3, .. }));
    }

    #[test]
    fn toy_product_with_dense() {
        let y = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let out = toy_s().spmm_dense(&y).unwrap();
        assert_eq!(
            out,
            DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap()
        );
        let bad = DenseMatrix::zeros(3, 1);
        assert!(toy_s().spmm_dense(&bad).is_err());
    }

    #[test]
    fn identity_and_zero_products() {
        let b = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 2.5);
        assert_eq!(SparseMatrix::identity(3).spmm_dense(&b).unwrap(), b);
        assert_eq!(
            SparseMatrix::zeros(2, 3).spmm_dense(&b).unwrap(),
            DenseMatrix::zeros(2, 4)
        );
    }

    #[test]
    fn toy_transpose() {
        let t = toy_s().transpose();
        assert_eq!(
            t.to_dense(),
            DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]]).unwrap()
        );
        assert_eq!(SparseMatrix::identity(4).transpose(), SparseMatrix::identity(4));
        let single = SparseMatrix::from_triplets(&[1], &[3], &[2.0], (2, 5)).unwrap();
        let st = single.transpose();
        assert_eq!(st.shape(), (5, 2));
        assert_eq!(st.get(3, 1), 2.0);
        assert_eq!(st.nnz(), 1);
    }

    #[test]
    fn row_sums_examples() {
        assert_eq!(toy_s().row_sums(), vec![2.0, 1.0, 1.0]);
        assert_eq!(SparseMatrix::identity(3).row_sums(), vec![1.0; 3]);
        assert_eq!(SparseMatrix::zeros(2, 3).row_sums(), vec![0.0; 2]);
    }

    #[test]
    fn scale_rows_of_temporal_toy() {
        // toy temporal summing matrix has the same shape as the cross-sectional one
        let s = toy_s();
        let scaled = s.scale_rows(&[0.25, 0.5, 0.5]).unwrap();
        assert_eq!(
            scaled.to_dense(),
            DenseMatrix::from_rows(&[vec![0.25, 0.25], vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
        );
        assert_eq!(s.scale_rows(&[1.0; 3]).unwrap(), s);
        let d = SparseMatrix::identity(3).scale_cols(&[2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d, SparseMatrix::diag(&[2.0, 3.0, 4.0]));
    }

    #[test]
    fn zero_scale_is_an_error() {
        assert!(toy_s().scale_rows(&[1.0, 0.0, 1.0]).is_err());
        assert!(toy_s().scale_cols(&[1.0]).is_err());
    }

    #[test]
    fn sparsity_examples() {
        let ones = SparseMatrix::from_dense(&DenseMatrix::filled(2, 2, 1.0));
        assert_eq!(ones.sparsity(), 0.0);
        assert!((toy_s().sparsity() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sparse_sparse_product_small() {
        let s = toy_s();
        let sts = s.transpose().spmm_sparse(&s).unwrap();
        assert_eq!(
            sts.to_dense(),
            DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()
        );
    }

    #[test]
    fn dense_times_sparse_matches_dense_product() {
        let a = DenseMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64);
        let s = toy_s();
        assert_eq!(
            a.mul_sparse(&s).unwrap(),
            a.matmul(&s.to_dense()).unwrap()
        );
    }

    #[test]
    fn matrix_market_dump_is_one_based() {
        let mm = toy_s().to_matrix_market();
        let lines: Vec<&str> = mm.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[1], "3 2 4");
        assert_eq!(lines[2], "1 1 1");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn serde_rejects_non_canonical_arrays() {
        let json = r#"{"n_rows":1,"n_cols":2,"row_offsets":[0,2],"col_indices":[1,0],"values":[1.0,1.0]}"#;
        assert!(serde_json::from_str::<SparseMatrix>(json).is_err());
        let s = toy_s();
        let back: SparseMatrix = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
