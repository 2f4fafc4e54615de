//! Separable scalar denoisers.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{DenoiserChoice, ThresholdRule};
use crate::error::{Error, Result};
use crate::model::{BernoulliGaussianPrior, GsModel};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied scalar map.
#[derive(Clone)]
pub struct BlackBox {
    pub name: String,
    f: ScalarFn,
    /// Whether finite differences may be taken.
    pub differentiable: bool,
    /// Points where the map is not smooth.
    pub kinks: Vec<f64>,
}

impl BlackBox {
    pub fn new<F>(name: &str, f: F, differentiable: bool) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        BlackBox {
            name: name.to_string(),
            f: Arc::new(f),
            differentiable,
            kinks: Vec::new(),
        }
    }

    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBox")
            .field("name", &self.name)
            .field("differentiable", &self.differentiable)
            .finish()
    }
}

/// A separable denoiser `r_i -> eta(r_i)`.
#[derive(Debug, Clone)]
pub enum Denoiser {
    Identity,
    Constant(f64),
    SoftThreshold { theta: f64 },
    /// Posterior mean of x under the BG prior given `r = alpha x + sqrt(v) z`.
    BgMmse { lambda: f64, alpha: f64, v: f64 },
    BlackBox(BlackBox),
}

impl Denoiser {
    pub fn soft_threshold(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::InvalidThreshold(theta));
        }
        Ok(Denoiser::SoftThreshold { theta })
    }

    pub fn bg_mmse(lambda: f64, alpha: f64, v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidVariance(v));
        }
        BernoulliGaussianPrior::new(lambda)?;
        Ok(Denoiser::BgMmse { lambda, alpha, v })
    }

    pub fn is_differentiable(&self) -> bool {
        match self {
            Denoiser::BlackBox(b) => b.differentiable,
            _ => true,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Denoiser::Identity => r,
            Denoiser::Constant(c) => *c,
            Denoiser::SoftThreshold { theta } => soft(r, *theta),
            Denoiser::BgMmse { lambda, alpha, v } => bg_posterior(r, *lambda, *alpha, *v).0,
            Denoiser::BlackBox(b) => (b.f)(r),
        }
    }

    /// d eta / d r. Soft thresholding uses the a.e. derivative; black boxes
    /// fall back to central differences.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        Ok(match self {
            Denoiser::Identity => 1.0,
            Denoiser::Constant(_) => 0.0,
            Denoiser::SoftThreshold { theta } => {
                if r.abs() > *theta {
                    1.0
                } else {
                    0.0
                }
            }
            Denoiser::BgMmse { lambda, alpha, v } => bg_posterior(r, *lambda, *alpha, *v).1,
            Denoiser::BlackBox(b) => {
                if !b.differentiable {
                    return Err(Error::UnsupportedStrategy(format!(
                        "'{}' is not differentiable; use the integral or monte-carlo strategy",
                        b.name
                    )));
                }
                let h = 1e-6 * (1.0 + r.abs());
                ((b.f)(r + h) - (b.f)(r - h)) / (2.0 * h)
            }
        })
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.iter().map(|&a| self.eval(a)).collect()
    }

    /// Points worth splitting quadrature at.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Denoiser::SoftThreshold { theta } if *theta > 0.0 => vec![-theta, *theta],
            Denoiser::BgMmse { v, .. } => {
                let sd = v.sqrt();
                [1.0, 4.0, 16.0].iter().flat_map(|k| [-k * sd, k * sd]).collect()
            }
            Denoiser::BlackBox(b) => b.kinks.clone(),
            _ => Vec::new(),
        }
    }
}

fn soft(r: f64, theta: f64) -> f64 {
    let a = r.abs() - theta;
    if a > 0.0 {
        a * r.signum()
    } else {
        0.0
    }
}

/// (posterior mean, its derivative) for the BG prior.
fn bg_posterior(r: f64, lambda: f64, alpha: f64, v: f64) -> (f64, f64) {
    let s = 1.0 / lambda;
    let s1 = alpha * alpha * s + v;
    let k = alpha * s / s1;
    if lambda >= 1.0 {
        return (k * r, k);
    }
    // w = P(active | r) = logistic(-l)
    let l = ((1.0 - lambda) / lambda).ln() + 0.5 * (s1 / v).ln() - 0.5 * r * r * (1.0 / v - 1.0 / s1);
    let w = if l > 0.0 {
        let e = (-l).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + l.exp())
    };
    let dw = w * (1.0 - w) * r * (1.0 / v - 1.0 / s1);
    (w * k * r, k * (w + r * dw))
}

/// Entrywise `max(|r_i| - theta, 0) sign(r_i)`.
pub fn soft_threshold(r: &[f64], theta: f64) -> Result<Vec<f64>> {
    Ok(Denoiser::soft_threshold(theta)?.apply(r))
}

/// Entrywise posterior mean of x given `r = x + sqrt(v) z` under BG(lambda).
pub fn bg_mmse_denoise(r: &[f64], lambda: f64, v: f64) -> Result<Vec<f64>> {
    Ok(Denoiser::bg_mmse(lambda, 1.0, v)?.apply(r))
}

/// A denoiser family whose parameters are refit to each input model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    pub choice: DenoiserChoice,
    pub threshold_rule: ThresholdRule,
}

impl DenoiserSpec {
    pub fn new(choice: DenoiserChoice, threshold_rule: ThresholdRule) -> Self {
        DenoiserSpec { choice, threshold_rule }
    }

    /// The denoiser to use on an input described by `gs`.
    pub fn instantiate(&self, prior: &BernoulliGaussianPrior, gs: GsModel) -> Result<Denoiser> {
        match self.choice {
            DenoiserChoice::Identity => Ok(Denoiser::Identity),
            DenoiserChoice::SoftThreshold => Denoiser::soft_threshold(self.threshold_rule.theta(gs.v)),
            DenoiserChoice::BgMmse => Denoiser::bg_mmse(prior.lambda, gs.alpha, gs.v),
        }
    }
}
