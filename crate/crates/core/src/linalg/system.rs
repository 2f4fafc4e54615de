use nalgebra::DMatrix;

use super::haar::{dense_mul, dense_mul_t, OrthogonalMatrix};
use crate::error::{Error, Result};

/// A linear map `A` that can be applied forward and in adjoint.
pub trait SensingOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `A s`
    fn forward(&self, s: &[f64]) -> Result<Vec<f64>>;
    /// `A^T r`
    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>>;
}

fn check(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// A sampled instance of `y = A x + n` with `A = U^T D V` held in SVD form.
///
/// `U` is `m x m`, `V` is `n x n` and `D` is the `m x n` rectangular diagonal
/// built from `d`.
#[derive(Debug, Clone)]
pub struct SvdSystem {
    pub u: OrthogonalMatrix,
    pub d: Vec<f64>,
    pub v: OrthogonalMatrix,
    pub x_true: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma2: f64,
    pub seed: u64,
}

impl SvdSystem {
    /// Assembles `y = U^T D V x + noise`.
    pub fn new(
        u: OrthogonalMatrix,
        d: Vec<f64>,
        v: OrthogonalMatrix,
        x_true: Vec<f64>,
        noise: &[f64],
        sigma2: f64,
        seed: u64,
    ) -> Result<Self> {
        check(u.dim(), d.len())?;
        check(v.dim(), x_true.len())?;
        check(d.len(), noise.len())?;
        if d.len() > x_true.len() {
            return Err(Error::InvalidDimension(format!(
                "m = {} exceeds n = {}",
                d.len(),
                x_true.len()
            )));
        }
        let mut sys = SvdSystem {
            u,
            d,
            v,
            x_true,
            y: Vec::new(),
            sigma2,
            seed,
        };
        let clean = sys.apply_forward(&sys.x_true)?;
        sys.y = clean.iter().zip(noise).map(|(a, b)| a + b).collect();
        Ok(sys)
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn n(&self) -> usize {
        self.x_true.len()
    }

    /// `A s = U^T D V s`.
    pub fn apply_forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        check(self.n(), s.len())?;
        let vs = self.v.apply(s)?;
        let dvs: Vec<f64> = self.d.iter().zip(&vs).map(|(d, z)| d * z).collect();
        self.u.apply_transpose(&dvs)
    }

    /// `A^T r = V^T D^T U r`.
    pub fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        check(self.m(), r.len())?;
        let ur = self.u.apply(r)?;
        let mut padded = vec![0.0; self.n()];
        for (i, (d, z)) in self.d.iter().zip(&ur).enumerate() {
            padded[i] = d * z;
        }
        self.v.apply_transpose(&padded)
    }

    /// The observation in the left singular basis, `U y`.
    pub fn rotated_observation(&self) -> Result<Vec<f64>> {
        self.u.apply(&self.y)
    }

    /// `(v A A^T + sigma2 I)^{-1} e`, diagonal in the left singular basis.
    pub fn solve_gram(&self, v: f64, sigma2: f64, e: &[f64]) -> Result<Vec<f64>> {
        check(self.m(), e.len())?;
        let ue = self.u.apply(e)?;
        let scaled: Vec<f64> = self
            .d
            .iter()
            .zip(&ue)
            .map(|(d, z)| z / (v * d * d + sigma2))
            .collect();
        self.u.apply_transpose(&scaled)
    }

    /// Dense `A`, for tests and small problems.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let u = self.u.to_dense();
        let v = self.v.to_dense();
        let mut dv = DMatrix::zeros(self.m(), self.n());
        for i in 0..self.m() {
            for j in 0..self.n() {
                dv[(i, j)] = self.d[i] * v[(i, j)];
            }
        }
        u.transpose() * dv
    }
}

impl SensingOperator for SvdSystem {
    fn rows(&self) -> usize {
        self.m()
    }
    fn cols(&self) -> usize {
        self.n()
    }
    fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.apply_forward(s)
    }
    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.apply_adjoint(r)
    }
}

/// A sampled `y = A x + n` with explicit dense `A`.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub a: DMatrix<f64>,
    pub x_true: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma2: f64,
    pub seed: u64,
}

impl DenseSystem {
    pub fn new(a: DMatrix<f64>, x_true: Vec<f64>, noise: &[f64], sigma2: f64, seed: u64) -> Result<Self> {
        check(a.ncols(), x_true.len())?;
        check(a.nrows(), noise.len())?;
        let clean = dense_mul(&a, &x_true);
        let y = clean.iter().zip(noise).map(|(a, b)| a + b).collect();
        Ok(DenseSystem {
            a,
            x_true,
            y,
            sigma2,
            seed,
        })
    }
}

impl SensingOperator for DenseSystem {
    fn rows(&self) -> usize {
        self.a.nrows()
    }
    fn cols(&self) -> usize {
        self.a.ncols()
    }
    fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        check(self.cols(), s.len())?;
        Ok(dense_mul(&self.a, s))
    }
    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        check(self.rows(), r.len())?;
        Ok(dense_mul_t(&self.a, r))
    }
}
