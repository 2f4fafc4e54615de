//! Haar-distributed orthogonal matrices.
//!
//! Two samplers are provided. [`sample_haar`] runs Householder QR of an IID
//! Gaussian matrix lazily: each reflector is drawn from the Gaussian trailing
//! column it would have been computed from, and the sign correction
//! `diag(sign(R_jj))` is folded in. The result is kept in factored form, so
//! sampling and applying cost O(n^2) instead of O(n^3).
//! [`sample_haar_dense`] forms the same distribution with an explicit dense QR
//! and is used as a reference at small sizes.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Repr {
    Dense(DMatrix<f64>),
    /// Q = H_0 H_1 ... H_{n-2} diag(signs), unit reflector vectors packed
    /// back to back (vector k has length n - k).
    Householder { vectors: Vec<f64>, signs: Vec<f64> },
}

/// A real orthogonal n x n matrix.
#[derive(Debug, Clone)]
pub struct OrthogonalMatrix {
    n: usize,
    repr: Repr,
}

fn reflector_offset(n: usize, k: usize) -> usize {
    k * n - k * k.saturating_sub(1) / 2
}

fn reflect(u: &[f64], z: &mut [f64]) {
    let dot: f64 = u.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    let s = 2.0 * dot;
    for (zi, ui) in z.iter_mut().zip(u) {
        *zi -= s * ui;
    }
}

impl OrthogonalMatrix {
    pub fn identity(n: usize) -> Self {
        OrthogonalMatrix {
            n,
            repr: Repr::Dense(DMatrix::identity(n, n)),
        }
    }

    /// Wraps a dense matrix. Orthogonality is checked to `tol` in max norm.
    pub fn from_dense(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "{}x{} is not a non-empty square matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let q = OrthogonalMatrix {
            n,
            repr: Repr::Dense(m),
        };
        let err = q.orthogonality_error();
        if err > tol {
            return Err(Error::InvalidDimension(format!(
                "matrix is not orthogonal (max |Q^T Q - I| = {err:e})"
            )));
        }
        Ok(q)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn reflector(&self, k: usize) -> std::ops::Range<usize> {
        let start = reflector_offset(self.n, k);
        start..start + (self.n - k)
    }

    /// Computes `Q z`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        match &self.repr {
            Repr::Dense(m) => Ok(dense_mul(m, z)),
            Repr::Householder { vectors, signs } => {
                let mut out: Vec<f64> = z.iter().zip(signs).map(|(a, s)| a * s).collect();
                for k in (0..self.n.saturating_sub(1)).rev() {
                    let range = self.reflector(k);
                    reflect(&vectors[range], &mut out[k..]);
                }
                Ok(out)
            }
        }
    }

    /// Computes `Q^T z`.
    pub fn apply_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        match &self.repr {
            Repr::Dense(m) => Ok(dense_mul_t(m, z)),
            Repr::Householder { vectors, signs } => {
                let mut out = z.to_vec();
                for k in 0..self.n.saturating_sub(1) {
                    let range = self.reflector(k);
                    reflect(&vectors[range], &mut out[k..]);
                }
                for (o, s) in out.iter_mut().zip(signs) {
                    *o *= s;
                }
                Ok(out)
            }
        }
    }

    /// Materializes the matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Householder { .. } => {
                let mut m = DMatrix::zeros(self.n, self.n);
                let mut e = vec![0.0; self.n];
                for j in 0..self.n {
                    e[j] = 1.0;
                    let col = self.apply(&e).expect("length matches");
                    m.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                m
            }
        }
    }

    /// max |Q^T Q - I| over all entries.
    pub fn orthogonality_error(&self) -> f64 {
        let q = self.to_dense();
        let g = q.transpose() * &q;
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }
}

pub(crate) fn dense_mul(m: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, zj) in z.iter().enumerate() {
        if *zj == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
            *o += a * zj;
        }
    }
    out
}

pub(crate) fn dense_mul_t(m: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().zip(z).map(|(a, b)| a * b).sum())
        .collect()
}

/// Samples an n x n Haar orthogonal matrix in factored form.
pub fn sample_haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("Haar dimension must be >= 1".into()));
    }
    let mut vectors = Vec::with_capacity(n * (n + 1) / 2);
    let mut signs = Vec::with_capacity(n);
    for k in 0..n {
        let len = n - k;
        let g: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        if len == 1 {
            signs.push(if g[0] >= 0.0 { 1.0 } else { -1.0 });
            break;
        }
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        let sgn = if g[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut u = g;
        u[0] += sgn * norm;
        let unorm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        for ui in u.iter_mut() {
            *ui /= unorm;
        }
        vectors.extend_from_slice(&u);
        // R_kk = -sgn * norm
        signs.push(-sgn);
    }
    Ok(OrthogonalMatrix {
        n,
        repr: Repr::Householder { vectors, signs },
    })
}

/// Samples an n x n Haar orthogonal matrix by dense QR of an IID Gaussian
/// matrix with the sign correction `Q diag(sign(R_jj))`.
pub fn sample_haar_dense<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("Haar dimension must be >= 1".into()));
    }
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthogonalMatrix {
        n,
        repr: Repr::Dense(q),
    })
}
