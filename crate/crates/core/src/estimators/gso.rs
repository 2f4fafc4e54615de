//! Gram-Schmidt orthogonalization of a prototype denoiser.
//!
//! For `r = alpha x + z`, `z ~ N(0, v)`, the orthogonalized output is
//! `C (eta(r) - B r)` where `B = E[z eta(r)] / v` makes the output error
//! uncorrelated with `z`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::denoiser::{Denoiser, DenoiserSpec};
use crate::config::{BStrategy, MIN_MC_SAMPLES};
use crate::error::{Error, Result};
use crate::model::{BernoulliGaussianPrior, GsModel};
use crate::quadrature::GaussianExpectation;
use crate::rng::child_stream;

/// Gaussian-channel moments of a denoiser under the BG prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// E[eta x]
    pub efx: f64,
    /// E[eta r]
    pub efr: f64,
    /// E[eta^2]
    pub eff: f64,
    /// E[eta'] when the derivative exists.
    pub edf: Option<f64>,
    /// E[z eta] / v
    pub b: f64,
}

impl Moments {
    /// E[(eta - x)^2], using E[x^2] = 1.
    pub fn mse(&self) -> f64 {
        self.eff - 2.0 * self.efx + 1.0
    }
}

/// Moments of `eta(alpha x + z)` by quadrature, one Gaussian per prior component.
pub fn moments(
    den: &Denoiser,
    prior: &BernoulliGaussianPrior,
    alpha: f64,
    v: f64,
    quad: &GaussianExpectation,
) -> Result<Moments> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidVariance(v));
    }
    let bp = den.breakpoints();
    let mut m = Moments {
        efx: 0.0,
        efr: 0.0,
        eff: 0.0,
        edf: if den.is_differentiable() { Some(0.0) } else { None },
        b: 0.0,
    };
    for (p, s) in prior.components() {
        let var = alpha * alpha * s + v;
        let fr = quad.expect(var, &bp, |r| den.eval(r) * r)?;
        let ff = quad.expect(var, &bp, |r| den.eval(r).powi(2))?;
        // E[x | r] = alpha s r / var within the component
        m.efx += p * alpha * s / var * fr;
        m.efr += p * fr;
        m.eff += p * ff;
        m.b += p * fr / var;
        if let Some(acc) = m.edf.as_mut() {
            *acc += p * quad.expect(var, &bp, |r| den.derivative(r).unwrap_or(f64::NAN))?;
        }
    }
    Ok(m)
}

/// B by the integral `E[z eta(alpha x + z)] / v`.
pub fn compute_b_integral(den: &Denoiser, prior: &BernoulliGaussianPrior, alpha: f64, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidVariance(v));
    }
    let quad = GaussianExpectation::default();
    let bp = den.breakpoints();
    let mut b = 0.0;
    for (p, s) in prior.components() {
        let var = alpha * alpha * s + v;
        b += p * quad.expect(var, &bp, |r| den.eval(r) * r)? / var;
    }
    Ok(b)
}

/// B as the empirical mean slope over a realized input.
pub fn compute_b_derivative(den: &Denoiser, r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::InvalidDimension("empty input".into()));
    }
    let mut acc = 0.0;
    for &a in r {
        acc += den.derivative(a)?;
    }
    Ok(acc / r.len() as f64)
}

/// E[eta'] by quadrature.
pub fn compute_b_derivative_expectation(
    den: &Denoiser,
    prior: &BernoulliGaussianPrior,
    alpha: f64,
    v: f64,
) -> Result<f64> {
    if !den.is_differentiable() {
        return Err(Error::UnsupportedStrategy("prototype is not differentiable".into()));
    }
    let quad = GaussianExpectation::default();
    let bp = den.breakpoints();
    let mut acc = 0.0;
    for (p, s) in prior.components() {
        let var = alpha * alpha * s + v;
        acc += p * quad.expect(var, &bp, |r| den.derivative(r).unwrap_or(f64::NAN))?;
    }
    Ok(acc)
}

const MC_CHUNK: usize = 1 << 16;

/// Monte-Carlo estimate of B with its standard error.
///
/// Samples are drawn in fixed-size chunks, each from its own child stream of
/// `seed`, and reduced in chunk order, so the result does not depend on the
/// thread count.
pub fn compute_b_montecarlo(
    den: &Denoiser,
    prior: &BernoulliGaussianPrior,
    alpha: f64,
    v: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::Config(format!(
            "monte-carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidVariance(v));
    }
    let sd = v.sqrt();
    let x_sd = prior.active_variance().sqrt();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = child_stream(seed, c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let active = prior.lambda >= 1.0 || rng.random::<f64>() < prior.lambda;
                let g: f64 = rng.sample(StandardNormal);
                let x = if active { x_sd * g } else { 0.0 };
                let z = sd * rng.sample::<f64, _>(StandardNormal);
                let t = z * den.eval(alpha * x + z) / v;
                s1 += t;
                s2 += t * t;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = samples as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// B = v_post / v_in, valid for MMSE denoisers.
pub fn compute_b_ep(v_phi_hat: f64, v_in: f64) -> Result<f64> {
    if !(v_in.is_finite() && v_in > 0.0) {
        return Err(Error::InvalidVariance(v_in));
    }
    if v_phi_hat.is_nan() || v_phi_hat < 0.0 {
        return Err(Error::InvalidVariance(v_phi_hat));
    }
    if v_phi_hat > v_in {
        return Err(Error::NonContractingDenoiser { v_post: v_phi_hat, v_in });
    }
    Ok(v_phi_hat / v_in)
}

/// How the scale C of the orthogonalized output is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CRule {
    /// C = 1 / (1 - B)
    EpNormalize,
    /// C = 1
    Unit,
}

impl CRule {
    pub fn c(&self, b: f64) -> Result<f64> {
        match self {
            CRule::Unit => Ok(1.0),
            CRule::EpNormalize => {
                let den = 1.0 - b;
                if den.abs() < 1e-12 {
                    return Err(Error::SingularNormalization(b));
                }
                Ok(1.0 / den)
            }
        }
    }
}

/// A prototype denoiser family plus its orthogonalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalizedEstimator {
    pub prototype: DenoiserSpec,
    pub b_strategy: BStrategy,
    pub c_rule: CRule,
}

/// Result of one orthogonalized denoising step.
#[derive(Debug, Clone)]
pub struct NleOutput {
    pub value: Vec<f64>,
    /// Predicted GS model of the output.
    pub gs: GsModel,
    pub b: f64,
    pub c: f64,
}

impl OrthogonalizedEstimator {
    pub fn new(prototype: DenoiserSpec, b_strategy: BStrategy) -> Self {
        let c_rule = if b_strategy == BStrategy::Zero {
            CRule::Unit
        } else {
            CRule::EpNormalize
        };
        OrthogonalizedEstimator {
            prototype,
            b_strategy,
            c_rule,
        }
    }

    /// B as expected under the input model (the state-evolution value).
    fn expected_b(&self, den: &Denoiser, m: &Moments, gs: GsModel) -> Result<f64> {
        match self.b_strategy {
            BStrategy::Zero => Ok(0.0),
            BStrategy::Integral | BStrategy::MonteCarlo { .. } => Ok(m.b),
            BStrategy::Derivative => m
                .edf
                .ok_or_else(|| Error::UnsupportedStrategy("prototype is not differentiable".into())),
            BStrategy::Ep => {
                if matches!(den, Denoiser::Identity) {
                    return Ok(1.0);
                }
                // for input alpha x + z the normalized input variance is v / alpha
                compute_b_ep(m.mse(), gs.v / gs.alpha)
            }
        }
    }

    fn output_model(&self, m: &Moments, b: f64, c: f64, gs: GsModel) -> Result<GsModel> {
        let alpha = c * (m.efx - b * gs.alpha);
        let err = c * c * (m.eff - 2.0 * b * m.efr + b * b * (gs.alpha * gs.alpha + gs.v));
        GsModel::new(alpha, (err - alpha * alpha).max(0.0))
    }

    /// Identity with B = 1 under ep-normalize, or an exact input: the
    /// output is the input.
    fn passes_through(&self, den: &Denoiser, gs: GsModel) -> bool {
        gs.v == 0.0 || (matches!(den, Denoiser::Identity) && self.c_rule == CRule::EpNormalize)
    }

    /// State-evolution map (alpha, v) -> (alpha_out, v_out).
    pub fn se(&self, prior: &BernoulliGaussianPrior, gs: GsModel, quad: &GaussianExpectation) -> Result<GsModel> {
        let den = self.prototype.instantiate_checked(prior, gs)?;
        if self.passes_through(&den, gs) {
            return Ok(gs);
        }
        let m = moments(&den, prior, gs.alpha, gs.v, quad)?;
        let b = self.expected_b(&den, &m, gs)?;
        let c = self.c_rule.c(b)?;
        self.output_model(&m, b, c, gs)
    }

    /// Denoises `input`, whose GS model is `gs`. `seed` drives the
    /// Monte-Carlo strategy and is otherwise unused.
    pub fn apply(
        &self,
        prior: &BernoulliGaussianPrior,
        input: &[f64],
        gs: GsModel,
        seed: u64,
        quad: &GaussianExpectation,
    ) -> Result<NleOutput> {
        let den = self.prototype.instantiate_checked(prior, gs)?;
        if self.passes_through(&den, gs) {
            return Ok(NleOutput {
                value: input.to_vec(),
                gs,
                b: 1.0,
                c: 1.0,
            });
        }
        let m = moments(&den, prior, gs.alpha, gs.v, quad)?;
        let b = match self.b_strategy {
            BStrategy::Derivative => compute_b_derivative(&den, input)?,
            BStrategy::MonteCarlo { samples } => compute_b_montecarlo(&den, prior, gs.alpha, gs.v, samples, seed)?.0,
            _ => self.expected_b(&den, &m, gs)?,
        };
        let c = self.c_rule.c(b)?;
        let value = orthogonalize(&den, input, b, c);
        Ok(NleOutput {
            value,
            gs: self.output_model(&m, b, c, gs)?,
            b,
            c,
        })
    }
}

impl DenoiserSpec {
    fn instantiate_checked(&self, prior: &BernoulliGaussianPrior, gs: GsModel) -> Result<Denoiser> {
        if gs.v == 0.0 {
            return Ok(Denoiser::Identity);
        }
        self.instantiate(prior, gs)
    }
}

/// `C (eta(r) - B r)` entrywise.
pub fn orthogonalize(den: &Denoiser, r: &[f64], b: f64, c: f64) -> Vec<f64> {
    r.iter().map(|&a| c * (den.eval(a) - b * a)).collect()
}
