use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a geometric singular-value profile: `m` values for an `m x n`
/// operator with condition parameter `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub m: usize,
    pub n: usize,
    pub kappa: f64,
}

impl SpectrumSpec {
    pub fn new(m: usize, n: usize, kappa: f64) -> Self {
        SpectrumSpec { m, n, kappa }
    }
}

/// Decreasing singular values with constant ratio `d_i / d_{i+1} = kappa^(1/m)`
/// scaled so that `sum d_i^2 = n`.
///
/// The largest-to-smallest ratio is `kappa^((m-1)/m)`.
pub fn geometric_spectrum(spec: SpectrumSpec) -> Result<Vec<f64>> {
    if spec.m == 0 || spec.n == 0 || spec.m > spec.n {
        return Err(Error::InvalidDimension(format!(
            "spectrum needs 1 <= m <= n, got m = {}, n = {}",
            spec.m, spec.n
        )));
    }
    if !(spec.kappa.is_finite() && spec.kappa >= 1.0) {
        return Err(Error::InvalidSpectrum(format!(
            "condition number must be finite and >= 1, got {}",
            spec.kappa
        )));
    }
    let log_ratio = spec.kappa.ln() / spec.m as f64;
    let raw: Vec<f64> = (0..spec.m).map(|i| (-(i as f64) * log_ratio).exp()).collect();
    let power: f64 = raw.iter().map(|d| d * d).sum();
    let scale = (spec.n as f64 / power).sqrt();
    Ok(raw.into_iter().map(|d| d * scale).collect())
}
