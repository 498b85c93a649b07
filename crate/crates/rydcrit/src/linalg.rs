//! Small dense-tensor helpers shared by the MPS/DMRG code.
//!
//! Tensors are flat `Vec<f64>` buffers in row-major order; contractions that
//! reduce to matrix products go through `matrixmultiply::dgemm`, everything
//! else is explicit loops. nalgebra is used only where a factorization
//! (SVD, QR, symmetric eigendecomposition) is needed.

use nalgebra::DMatrix;

/// Row-major `C = A * B`, `A` is `m x k`, `B` is `k x n`.
pub fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    if m == 0 || k == 0 || n == 0 {
        return c;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Row-major `C = A^T * B`, `A` is `k x m` (transposed on the fly), `B` is `k x n`.
pub fn matmul_at_b(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    if m == 0 || k == 0 || n == 0 {
        return c;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Row-major `C = A * B^T`, `A` is `m x k`, `B` is `n x k` (transposed on the fly).
pub fn matmul_a_bt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![0.0; m * n];
    if m == 0 || k == 0 || n == 0 {
        return c;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Copy a row-major buffer into a nalgebra matrix.
pub fn to_dmatrix(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(data.len(), rows * cols);
    DMatrix::from_row_slice(rows, cols, data)
}

/// Copy a nalgebra matrix back into a row-major buffer.
pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Euclidean norm of a flat buffer.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product of two flat buffers.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Scale a buffer in place.
pub fn scale(v: &mut [f64], alpha: f64) {
    for x in v {
        *x *= alpha;
    }
}
