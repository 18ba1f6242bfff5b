//! Dense matrices and the handful of vector kernels the solvers need.
//!
//! Everything here is desk-scale (n up to a few thousand), so matrices are
//! stored densely in row-major order. Spectral quantities are delegated to
//! `nalgebra`'s dense symmetric eigensolver and SVD.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// A dense real `rows × cols` matrix stored row-major.
///
/// Used both for the constraint map `A` and for the quadratic term `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// The constraint operator `A: R^n -> R^m`.
pub type LinearMap = DenseMatrix;

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        check_len("matrix entries", rows * cols, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry ({}, {}) is not finite",
                i / cols,
                i % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_len("matrix row", c, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = Self::zeros(n, n)?;
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m.check_finite()?;
        Ok(m)
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("matrix entries must be finite"))
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `max |M_ij - M_ji|`; infinite for non-square matrices.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.max_asymmetry() == 0.0
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `out = M x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    /// `out = Mᵀ y`.
    pub fn tr_mul_vec_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if *yi != 0.0 {
                axpy(*yi, row, out);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matrix-vector product", self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        Ok(out)
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("transposed matrix-vector product", self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        self.tr_mul_vec_into(y, &mut out);
        Ok(out)
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Largest eigenvalue magnitude of a symmetric matrix, from a full
    /// dense symmetric eigensolve.
    pub fn spectral_radius_symmetric(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !self.is_symmetric() {
            return Err(Error::invalid(format!(
                "matrix is not symmetric (max |M_ij - M_ji| = {:e})",
                self.max_asymmetry()
            )));
        }
        let eig = self.to_nalgebra().symmetric_eigenvalues();
        Ok(eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
    }

    /// Largest singular value, from a dense SVD.
    pub fn largest_singular_value(&self) -> f64 {
        let sv = self.to_nalgebra().singular_values();
        sv.iter().fold(0.0_f64, |acc, v| acc.max(*v))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `‖a − b‖²`
#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn products_match_hand_values() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.mul_vec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(m.tr_mul_vec(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
        assert_eq!(m.transpose().transpose(), m);
        assert!(m.mul_vec(&[1.0]).is_err());
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let q = DenseMatrix::diagonal(&[3.0, -5.0]).unwrap();
        assert!((q.spectral_radius_symmetric().unwrap() - 5.0).abs() < 1e-14);
        let z = DenseMatrix::zeros(3, 3).unwrap();
        assert_eq!(z.spectral_radius_symmetric().unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_rejects_asymmetric() {
        let q = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            q.spectral_radius_symmetric(),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn singular_value_small_cases() {
        let a = DenseMatrix::diagonal(&[2.0, 1.0]).unwrap();
        assert!((a.largest_singular_value() - 2.0).abs() < 1e-14);
        let row = DenseMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert!((row.largest_singular_value() - 5.0).abs() < 1e-14);
    }
}
