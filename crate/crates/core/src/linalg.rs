//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.
//!
//! Matrices here are at most 8x8 (second fundamental forms and the test
//! matrices of the structural lemmas), so the solver favours robustness over
//! asymptotic speed.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::normal;

pub const MAX_DIM: usize = 8;

/// A real symmetric matrix. Symmetry is exact in storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Spectral decomposition `A = V diag(values) V^T`, values ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps `m`, rejecting any asymmetry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        let n = m.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if worst > 0.0 {
            return Err(Error::NotSymmetric(worst));
        }
        Ok(SymMatrix(m))
    }

    /// Averages `m` with its transpose.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m.clone();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, got: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        SymMatrix(DMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect()).collect()
    }

    /// `R A R^T`.
    pub fn conjugate(&self, r: &DMatrix<f64>) -> Self {
        SymMatrix::symmetrize(&(r * &self.0 * r.transpose()))
    }

    /// `R^T A R`, i.e. the matrix expressed in the basis given by the columns of `R`.
    pub fn in_basis(&self, r: &DMatrix<f64>) -> Self {
        SymMatrix::symmetrize(&(r.transpose() * &self.0 * r))
    }

    /// Frobenius inner product `sum_ij A_ij B_ij`.
    pub fn contract(&self, other: &SymMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    /// `A + c I`.
    pub fn shift(&self, c: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)] += c;
        }
        SymMatrix(m)
    }

    pub fn eigen(&self) -> Eigen {
        jacobi_eigen(&self.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn from_eigen(values: &[f64], vectors: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::diag(values).conjugate(vectors)
    }

    /// Inverse of a positive definite matrix through its spectral decomposition.
    pub fn spd_inverse(&self) -> Result<SymMatrix> {
        let e = self.eigen();
        if let Some(&v) = e.values.iter().find(|v| **v <= 0.0) {
            return Err(Error::Precondition(format!("matrix not positive definite (eigenvalue {v:e})")));
        }
        let inv: Vec<f64> = e.values.iter().map(|v| 1.0 / v).collect();
        Ok(SymMatrix::from_eigen(&inv, &e.vectors))
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Sweeps all off-diagonal pairs with the Rutishauser rotation until the
/// off-diagonal mass is negligible relative to the Frobenius norm. Returns
/// eigenvalues in ascending order with matching eigenvector columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Eigen {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();
    if scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off.sqrt() <= 1e-18 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Eigen { values, vectors }
}

/// Random rotation built from a product of Givens rotations with uniform
/// angles over every coordinate plane, applied twice.
pub fn random_rotation<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::<f64>::identity(n, n);
    for _ in 0..2 {
        for p in 0..n {
            for q in (p + 1)..n {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let (s, c) = angle.sin_cos();
                for k in 0..n {
                    let rp = r[(p, k)];
                    let rq = r[(q, k)];
                    r[(p, k)] = c * rp - s * rq;
                    r[(q, k)] = s * rp + c * rq;
                }
            }
        }
    }
    r
}

/// Symmetric matrix with independent standard normal entries on and above the diagonal.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = normal(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix(m)
}
