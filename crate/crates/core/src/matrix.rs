//! Dense row-major matrices and the Cholesky factorization used by the
//! prologue.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::Error;

/// Dense row-major matrix of binary64 values.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from a flat row-major buffer.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, Error> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Plain triple-loop product; only used off the hot path.
    pub fn mul(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Sequential `A·x`, independent of the kernel backends.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        self.row_iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&Matrix]) -> Result<Matrix, Error> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::Dimension("vstack column mismatch".into()));
            }
            data.extend_from_slice(&b.data);
            rows += b.rows;
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            self.row_mut(r0 + i)[c0..c0 + block.cols].copy_from_slice(block.row(i));
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// Square-root-free Cholesky factorization `H = L·D·Lᵀ` with unit
/// lower-triangular `L` and positive diagonal `D`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    /// Strict lower triangle holds `L`, the diagonal holds `D`.
    packed: Matrix,
}

impl Cholesky {
    /// Factors a symmetric matrix, reading only its lower triangle.
    ///
    /// Fails with the index of the first pivot that is not strictly positive.
    pub fn factor(a: &Matrix) -> Result<Self, Error> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Dimension(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let mut f = Matrix::zeros(n, n);
        // work[k] = L[j][k]·D[k] for the current column j
        let mut work = vec![0.0; n];
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                work[k] = f[(j, k)] * f[(k, k)];
                pivot -= f[(j, k)] * work[k];
            }
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            f[(j, j)] = pivot;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= f[(i, k)] * work[k];
                }
                f[(i, j)] = s / pivot;
            }
        }
        Ok(Cholesky { packed: f })
    }

    pub fn dim(&self) -> usize {
        self.packed.rows()
    }

    pub fn pivots(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.packed[(i, i)]).collect()
    }

    /// Solves `H·x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n, "Cholesky solve dimension mismatch");
        let f = &self.packed;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= f[(i, k)] * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= f[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= f[(k, i)] * b[k];
            }
            b[i] = s;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
