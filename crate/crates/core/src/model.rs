//! GS-model bookkeeping, the Bernoulli-Gaussian source and system sampling.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::linalg::{geometric_spectrum, sample_haar, DenseSystem, SpectrumSpec, SvdSystem};
use crate::rng::stream;

/// `x_hat = alpha * x + xi` with `xi` orthogonal to `x` and `|xi|^2 / n = v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsModel {
    pub alpha: f64,
    pub v: f64,
}

impl GsModel {
    pub fn new(alpha: f64, v: f64) -> Result<Self> {
        if !alpha.is_finite() || !(v.is_finite() && v >= 0.0) {
            return Err(Error::DegenerateModel { alpha, v });
        }
        Ok(GsModel { alpha, v })
    }

    /// alpha = 1.
    pub fn normalized(v: f64) -> Result<Self> {
        Self::new(1.0, v)
    }

    /// The model of an MMSE estimate, where v = alpha (1 - alpha).
    pub fn mmse(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::DegenerateModel {
                alpha,
                v: alpha * (1.0 - alpha),
            });
        }
        Self::new(alpha, alpha * (1.0 - alpha))
    }

    /// The zero estimate.
    pub fn trivial() -> Self {
        GsModel { alpha: 0.0, v: 0.0 }
    }

    pub fn is_trivial(&self) -> bool {
        self.alpha == 0.0 && self.v == 0.0
    }

    /// alpha^2 / v
    pub fn effective_snr(&self) -> f64 {
        self.alpha * self.alpha / self.v
    }
}

/// x_i = 0 with probability 1 - lambda, else N(0, 1/lambda).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliGaussianPrior {
    pub lambda: f64,
}

impl BernoulliGaussianPrior {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must be in (0, 1], got {lambda}")));
        }
        Ok(BernoulliGaussianPrior { lambda })
    }

    pub fn active_variance(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Mixture components as (weight, variance) pairs.
    pub fn components(&self) -> Vec<(f64, f64)> {
        if self.lambda >= 1.0 {
            vec![(1.0, 1.0)]
        } else {
            vec![(1.0 - self.lambda, 0.0), (self.lambda, self.active_variance())]
        }
    }
}

pub fn sample_prior<R: Rng + ?Sized>(prior: &BernoulliGaussianPrior, n: usize, rng: &mut R) -> Vec<f64> {
    let sd = prior.active_variance().sqrt();
    (0..n)
        .map(|_| {
            let active = prior.lambda >= 1.0 || rng.random::<f64>() < prior.lambda;
            let g: f64 = rng.sample(StandardNormal);
            if active {
                sd * g
            } else {
                0.0
            }
        })
        .collect()
}

/// Per-realization GS decomposition of `x_hat` against `x`.
pub fn gs_decompose(x_hat: &[f64], x: &[f64]) -> Result<(GsModel, Vec<f64>)> {
    if x_hat.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    let xx: f64 = x.iter().map(|a| a * a).sum();
    if xx == 0.0 || x.is_empty() {
        return Err(Error::UndefinedProjection);
    }
    let alpha = x_hat.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / xx;
    let xi: Vec<f64> = x_hat.iter().zip(x).map(|(a, b)| a - alpha * b).collect();
    let v = xi.iter().map(|a| a * a).sum::<f64>() / x.len() as f64;
    Ok((GsModel::new(alpha, v)?, xi))
}

/// Returns (omega, mse): the best scalar gain and the MSE of `omega * x_hat`.
pub fn mse_from_gs(g: GsModel) -> Result<(f64, f64)> {
    let den = g.alpha * g.alpha + g.v;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::DegenerateModel { alpha: g.alpha, v: g.v });
    }
    Ok((g.alpha / den, g.v / den))
}

/// Samples `U`, `V`, `x` and the noise for one trial.
pub fn build_system(cfg: &ExperimentConfig, seed: u64) -> Result<SvdSystem> {
    let n = cfg.n;
    let m = cfg.m();
    let prior = BernoulliGaussianPrior::new(cfg.lambda)?;
    let d = geometric_spectrum(SpectrumSpec::new(m, n, cfg.kappa))?;
    let mut rng = stream(seed);
    let v = sample_haar(n, &mut rng)?;
    let u = sample_haar(m, &mut rng)?;
    let x = sample_prior(&prior, n, &mut rng);
    let sigma2 = cfg.sigma2();
    let noise = gaussian_noise(m, sigma2, &mut rng);
    SvdSystem::new(u, d, v, x, &noise, sigma2, seed)
}

/// Dense system with IID N(0, 1/m) entries.
pub fn build_dense_system(cfg: &ExperimentConfig, seed: u64) -> Result<DenseSystem> {
    let n = cfg.n;
    let m = cfg.m();
    let prior = BernoulliGaussianPrior::new(cfg.lambda)?;
    let mut rng = stream(seed);
    let sd = 1.0 / (m as f64).sqrt();
    let a = DMatrix::from_fn(m, n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    let x = sample_prior(&prior, n, &mut rng);
    let sigma2 = cfg.sigma2();
    let noise = gaussian_noise(m, sigma2, &mut rng);
    DenseSystem::new(a, x, &noise, sigma2, seed)
}

fn gaussian_noise<R: Rng + ?Sized>(m: usize, sigma2: f64, rng: &mut R) -> Vec<f64> {
    let sd = sigma2.sqrt();
    (0..m)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            sd * g
        })
        .collect()
}
