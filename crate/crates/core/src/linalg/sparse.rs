use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::Scalar;

/// CSR matrix from triplets; duplicates are summed in insertion order.
pub fn csr_from_triplets<T: Scalar>(
    nrows: usize,
    ncols: usize,
    triplets: &[(usize, usize, T)],
) -> CsrMatrix<T> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for &(i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

pub fn mul_vec<T: Scalar>(a: &CsrMatrix<T>, x: &DVector<T>) -> DVector<T> {
    let mut y = DVector::from_element(a.nrows(), T::zero());
    for (i, row) in a.row_iter().enumerate() {
        let mut acc = T::zero();
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            acc += v * x[j];
        }
        y[i] = acc;
    }
    y
}

/// Submatrix `a[rows, cols]` with the given index lists (in that order).
pub fn extract_block<T: Scalar>(
    a: &CsrMatrix<T>,
    rows: &[usize],
    cols: &[usize],
) -> CsrMatrix<T> {
    let mut col_map = vec![usize::MAX; a.ncols()];
    for (k, &c) in cols.iter().enumerate() {
        col_map[c] = k;
    }
    let mut triplets = Vec::new();
    for (r, &i) in rows.iter().enumerate() {
        let row = a.row(i);
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            if col_map[j] != usize::MAX {
                triplets.push((r, col_map[j], v));
            }
        }
    }
    csr_from_triplets(rows.len(), cols.len(), &triplets)
}

pub fn transpose<T: Scalar>(a: &CsrMatrix<T>) -> CsrMatrix<T> {
    let triplets: Vec<_> = a.triplet_iter().map(|(i, j, &v)| (j, i, v)).collect();
    csr_from_triplets(a.ncols(), a.nrows(), &triplets)
}

pub fn sparse_to_dense<T: Scalar>(a: &CsrMatrix<T>) -> DMatrix<T> {
    let mut d = DMatrix::from_element(a.nrows(), a.ncols(), T::zero());
    for (i, j, &v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

pub fn max_abs<T: Scalar>(a: &CsrMatrix<T>) -> f64 {
    a.values().iter().map(|v| v.modulus()).fold(0.0, f64::max)
}
