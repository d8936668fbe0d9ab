//! Dense row-major f64 matrices, Gram accumulation and a blocked Cholesky
//! solver. Products go through `matrixmultiply`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::LengthMismatch { expected: self.cols, actual: rhs.rows });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm(self.rows, self.cols, rhs.cols, &self.data, (self.cols, 1), &rhs.data, (rhs.cols, 1), &mut out.data, 0.0);
        Ok(out)
    }

    /// `self^T * rhs`.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::LengthMismatch { expected: self.rows, actual: rhs.rows });
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        gemm(self.cols, self.rows, rhs.cols, &self.data, (1, self.cols), &rhs.data, (rhs.cols, 1), &mut out.data, 0.0);
        Ok(out)
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += v;
        }
    }
}

/// `c = a * b + beta * c` with `c` dense row-major `m x n`; `a` is `m x k` and
/// `b` is `k x n` with the given (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), c: &mut [f64], beta: f64) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // Safety: every index reached through the strides lies inside the slices
    // for the shapes the callers pass.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const GRAM_BLOCK: usize = 256;

/// Accumulates `H^T H` over row chunks of `H`. Only lower-triangular blocks
/// are computed; [`GramAccumulator::finish`] mirrors them. The summation
/// order depends only on the chunking, so results are reproducible.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    dim: usize,
    gram: Vec<f64>,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { dim, gram: vec![0.0; dim * dim] }
    }

    /// Adds `chunk^T chunk` for a row-major `rows x dim` chunk.
    pub fn add_rows(&mut self, chunk: &[f64], rows: usize) {
        let n = self.dim;
        assert_eq!(chunk.len(), rows * n, "chunk shape");
        if rows == 0 {
            return;
        }
        for bi in (0..n).step_by(GRAM_BLOCK) {
            let mi = GRAM_BLOCK.min(n - bi);
            for bj in (0..=bi).step_by(GRAM_BLOCK) {
                let nj = GRAM_BLOCK.min(n - bj);
                unsafe {
                    matrixmultiply::dgemm(
                        mi,
                        rows,
                        nj,
                        1.0,
                        chunk.as_ptr().add(bi),
                        1,
                        n as isize,
                        chunk.as_ptr().add(bj),
                        n as isize,
                        1,
                        1.0,
                        self.gram.as_mut_ptr().add(bi * n + bj),
                        n as isize,
                        1,
                    );
                }
            }
        }
    }

    pub fn finish(mut self) -> Matrix {
        let n = self.dim;
        for i in 0..n {
            for j in i + 1..n {
                self.gram[i * n + j] = self.gram[j * n + i];
            }
        }
        Matrix { rows: n, cols: n, data: self.gram }
    }
}

const CHOL_BLOCK: usize = 64;

/// Lower Cholesky factor of a symmetric positive-definite matrix, in place.
/// Only the lower triangle of the result is meaningful.
pub fn cholesky_in_place(a: &mut Matrix) -> Result<()> {
    let n = a.rows;
    assert_eq!(n, a.cols, "square matrix");
    let d = &mut a.data;
    for k0 in (0..n).step_by(CHOL_BLOCK) {
        let kb = CHOL_BLOCK.min(n - k0);
        let k1 = k0 + kb;
        // diagonal block and panel below it
        for j in k0..k1 {
            let mut s = d[j * n + j];
            for p in k0..j {
                s -= d[j * n + p] * d[j * n + p];
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let pivot = libm::sqrt(s);
            d[j * n + j] = pivot;
            for i in j + 1..n {
                let mut s = d[i * n + j];
                for p in k0..j {
                    s -= d[i * n + p] * d[j * n + p];
                }
                d[i * n + j] = s / pivot;
            }
        }
        // trailing update A22 -= L21 L21^T
        let m = n - k1;
        if m > 0 {
            unsafe {
                let base = d.as_mut_ptr();
                matrixmultiply::dgemm(
                    m,
                    kb,
                    m,
                    -1.0,
                    base.add(k1 * n + k0),
                    n as isize,
                    1,
                    base.add(k1 * n + k0),
                    1,
                    n as isize,
                    1.0,
                    base.add(k1 * n + k1),
                    n as isize,
                    1,
                );
            }
        }
    }
    Ok(())
}

/// Solves `L L^T X = B` in place for a factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &Matrix, b: &mut Matrix) -> Result<()> {
    let n = l.rows;
    if b.rows != n {
        return Err(Error::LengthMismatch { expected: n, actual: b.rows });
    }
    let c = b.cols;
    let ld = &l.data;
    let bd = &mut b.data;
    for i in 0..n {
        for p in 0..i {
            let f = ld[i * n + p];
            if f != 0.0 {
                for k in 0..c {
                    bd[i * c + k] -= f * bd[p * c + k];
                }
            }
        }
        let pivot = ld[i * n + i];
        for k in 0..c {
            bd[i * c + k] /= pivot;
        }
    }
    for i in (0..n).rev() {
        for p in i + 1..n {
            let f = ld[p * n + i];
            if f != 0.0 {
                for k in 0..c {
                    bd[i * c + k] -= f * bd[p * c + k];
                }
            }
        }
        let pivot = ld[i * n + i];
        for k in 0..c {
            bd[i * c + k] /= pivot;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = StreamRng::new(seed, 0);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.normal(0.0, 1.0)).collect()).unwrap()
    }

    fn naive_t_mul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.cols, b.cols);
        for i in 0..a.cols {
            for j in 0..b.cols {
                let s: f64 = (0..a.rows).map(|k| a.get(k, i) * b.get(k, j)).sum();
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn gram_matches_naive() {
        let h = random(37, 300, 1);
        let mut acc = GramAccumulator::new(300);
        acc.add_rows(&h.data[..20 * 300], 20);
        acc.add_rows(&h.data[20 * 300..], 17);
        let g = acc.finish();
        let expected = naive_t_mul(&h, &h);
        for (a, b) in g.data.iter().zip(&expected.data) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn products() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 1, vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[-2.0, -2.0]);
        let t = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(a.t_matmul(&t).unwrap().data(), &[5.0, 7.0, 9.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn cholesky_solves_spd_systems() {
        for &n in &[1usize, 5, 64, 65, 150] {
            let h = random(n + 10, n, n as u64);
            let mut g = h.t_matmul(&h).unwrap();
            g.add_to_diagonal(0.5);
            let x_true = random(n, 3, 99);
            let b = g.matmul(&x_true).unwrap();
            let mut l = g.clone();
            cholesky_in_place(&mut l).unwrap();
            let mut x = b.clone();
            cholesky_solve(&l, &mut x).unwrap();
            for (a, e) in x.data.iter().zip(&x_true.data) {
                assert!((a - e).abs() < 1e-8, "n={n}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(cholesky_in_place(&mut m), Err(Error::NotPositiveDefinite { pivot: 1 }));
    }
}
