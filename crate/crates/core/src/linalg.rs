//! Small dense linear algebra used by the learners.
//!
//! Dimensions here are at most a few thousand and most hot paths are
//! element-wise, so a row-major `Vec<f64>` matrix is all that is needed.

use crate::error::{check_dim, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Element-wise product.
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `diag(d) · self`
    pub fn scale_rows(&self, d: &[f64]) -> Matrix {
        Self::from_fn(self.rows, self.cols, |i, j| d[i] * self.get(i, j))
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    /// `self · other`
    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Rank of the matrix by Gaussian elimination with partial pivoting.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..a.cols {
            if rank == a.rows {
                break;
            }
            let pivot = (rank..a.rows)
                .max_by(|&x, &y| a.get(x, col).abs().total_cmp(&a.get(y, col).abs()))
                .unwrap();
            if a.get(pivot, col).abs() <= tol {
                continue;
            }
            for j in 0..a.cols {
                let (p, r) = (a.get(pivot, j), a.get(rank, j));
                a.set(pivot, j, r);
                a.set(rank, j, p);
            }
            for i in rank + 1..a.rows {
                let f = a.get(i, col) / a.get(rank, col);
                for j in col..a.cols {
                    let v = a.get(i, j) - f * a.get(rank, j);
                    a.set(i, j, v);
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Jacobian `G` of an update `Δ(w)`, with `G[i][j] = ∂Δ_i/∂w_j`.
///
/// TD and LMS updates have rank-one Jacobians `G = left · rightᵀ`, which keeps
/// every product linear in `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Jacobian {
    Dense(Matrix),
    RankOne { left: Vec<f64>, right: Vec<f64> },
}

impl Jacobian {
    pub fn dim(&self) -> usize {
        match self {
            Jacobian::Dense(m) => m.rows(),
            Jacobian::RankOne { left, .. } => left.len(),
        }
    }

    /// `G · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Dense(m) => m.mul_vec(v),
            Jacobian::RankOne { left, right } => {
                let s = dot(right, v);
                left.iter().map(|l| l * s).collect()
            }
        }
    }

    /// `Gᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Dense(m) => m.tr_mul_vec(v),
            Jacobian::RankOne { left, right } => {
                let s = dot(left, v);
                right.iter().map(|r| r * s).collect()
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Jacobian::Dense(m) => m.diagonal(),
            Jacobian::RankOne { left, right } => hadamard(left, right),
        }
    }

    /// `G · Ψ`
    pub fn mul_mat(&self, psi: &Matrix) -> Matrix {
        match self {
            Jacobian::Dense(m) => m.mul_mat(psi),
            Jacobian::RankOne { left, right } => {
                let row = psi.tr_mul_vec(right);
                Matrix::outer(left, &row)
            }
        }
    }

    /// `diag(d) · G`
    pub fn scale_rows(&self, d: &[f64]) -> Jacobian {
        match self {
            Jacobian::Dense(m) => Jacobian::Dense(m.scale_rows(d)),
            Jacobian::RankOne { left, right } => Jacobian::RankOne {
                left: hadamard(d, left),
                right: right.clone(),
            },
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            Jacobian::Dense(m) => m.clone(),
            Jacobian::RankOne { left, right } => Matrix::outer(left, right),
        }
    }
}
