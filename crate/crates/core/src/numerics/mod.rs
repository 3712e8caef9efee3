//! Dense f64 linear algebra, activations, seeded randomness and the
//! finite-difference gradient oracle.
//!
//! Everything here is deliberately small: the largest matrices in the
//! toolkit are embedding tables and a handful of hidden-layer weights, so
//! row-major `Vec<f64>` storage with straightforward loops is enough.

mod gradcheck;
mod rng;

pub use gradcheck::{finite_difference_gradient, max_relative_error, relative_error};
pub use rng::{derive_seed, Rng};

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::config("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `out += self · x`
    pub fn mul_vec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · y`
    pub fn mul_vec_transposed_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi != 0.0 {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += w * yi;
                }
            }
        }
    }

    /// `self += u · vᵀ`
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (&ui, row) in u.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ui != 0.0 {
                for (r, &vj) in row.iter_mut().zip(v) {
                    *r += ui * vj;
                }
            }
        }
    }
}

/// Dense vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Inner product accumulated in four interleaved lanes, combined as
/// `(l0 + l1) + (l2 + l3)` plus the tail. The order is fixed, so results are
/// reproducible bit for bit.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            lanes[k] += x[k] * y[k];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// `W·a + b`.
pub fn affine(weight: &Matrix, bias: &[f64], input: &[f64]) -> Result<Vector> {
    if weight.cols() != input.len() || weight.rows() != bias.len() {
        return Err(Error::config(format!(
            "affine shape mismatch: W is {}x{}, b has {}, a has {}",
            weight.rows(),
            weight.cols(),
            bias.len(),
            input.len()
        )));
    }
    let mut out = vec![0.0; weight.rows()];
    affine_into(weight, bias, input, &mut out);
    Ok(out.into())
}

/// Unchecked `out = W·a + b`; the product is formed first and the bias
/// added last so that every caller rounds identically.
pub(crate) fn affine_into(weight: &Matrix, bias: &[f64], input: &[f64], out: &mut [f64]) {
    for ((o, row), &b) in out
        .iter_mut()
        .zip(weight.as_slice().chunks_exact(weight.cols()))
        .zip(bias)
    {
        *o = dot(row, input) + b;
    }
}

pub fn relu(a: &[f64]) -> Vector {
    a.iter().map(|&x| relu_scalar(x)).collect::<Vec<_>>().into()
}

#[inline]
pub(crate) fn relu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Logistic function, evaluated through `exp(-|x|)` so it never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Matrix of i.i.d. `N(0, 0.01²)` draws.
pub fn gaussian_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    gaussian_matrix(rows, cols, 0.01, rng)
}

pub fn gaussian_matrix(rows: usize, cols: usize, std_dev: f64, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal(std_dev)).collect();
    Matrix { rows, cols, data }
}
