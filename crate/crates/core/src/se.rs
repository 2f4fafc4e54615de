//! State evolution: the deterministic (alpha, v) recursion of the iteration.

use serde::{Deserialize, Serialize};

use crate::algorithms::DIVERGENCE_LIMIT;
use crate::config::{Algorithm, BStrategy, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimators::{moments, DenoiserSpec, LeKind, LinearEstimator, OrthogonalizedEstimator};
use crate::linalg::{geometric_spectrum, SpectrumSpec};
use crate::model::{mse_from_gs, BernoulliGaussianPrior, GsModel};
use crate::quadrature::GaussianExpectation;

/// GS parameters after the linear step (gamma) and the non-linear step (phi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeState {
    pub alpha_gamma: f64,
    pub v_gamma: f64,
    pub alpha_phi: f64,
    pub v_phi: f64,
}

impl SeState {
    pub fn gamma(&self) -> GsModel {
        GsModel {
            alpha: self.alpha_gamma,
            v: self.v_gamma,
        }
    }

    pub fn phi(&self) -> GsModel {
        GsModel {
            alpha: self.alpha_phi,
            v: self.v_phi,
        }
    }

    /// MSE of the best scaling of the non-linear output.
    pub fn mse(&self) -> f64 {
        mse_from_gs(self.phi()).map(|(_, m)| m).unwrap_or(f64::NAN)
    }

    /// alpha^2 / v of the non-linear output.
    pub fn effective_snr(&self) -> f64 {
        self.phi().effective_snr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrajectory {
    pub states: Vec<SeState>,
    pub converged: bool,
    pub fixed_point: Option<SeState>,
}

impl SeTrajectory {
    pub fn mse(&self) -> Vec<f64> {
        self.states.iter().map(SeState::mse).collect()
    }

    pub fn effective_snr(&self) -> Vec<f64> {
        self.states.iter().map(SeState::effective_snr).collect()
    }

    /// MSE at iteration `t` (0-based), holding the last state after convergence.
    pub fn mse_at(&self, t: usize) -> f64 {
        match self.states.get(t).or(self.states.last()) {
            Some(s) => s.mse(),
            None => f64::NAN,
        }
    }
}

/// One linear step: `(alpha_in, v_in) -> (1, v_out)`.
pub fn se_le_step(d: &[f64], n: usize, sigma2: f64, alpha_in: f64, v_in: f64, kind: LeKind) -> Result<(f64, f64)> {
    if d.is_empty() {
        return Err(Error::InvalidSpectrum("empty spectrum".into()));
    }
    let le = LinearEstimator::new(kind, d.to_vec(), n, sigma2)?;
    let out = le.se(GsModel::new(alpha_in, v_in)?)?;
    Ok((out.alpha, out.v))
}

/// One orthogonalized non-linear step.
pub fn se_nle_step(
    prior: &BernoulliGaussianPrior,
    denoiser: &DenoiserSpec,
    alpha_in: f64,
    v_in: f64,
    b_strategy: BStrategy,
) -> Result<(f64, f64)> {
    if !(v_in.is_finite() && v_in > 0.0) {
        return Err(Error::InvalidVariance(v_in));
    }
    let est = OrthogonalizedEstimator::new(*denoiser, b_strategy);
    let out = est.se(prior, GsModel::new(alpha_in, v_in)?, &GaussianExpectation::default())?;
    Ok((out.alpha, out.v))
}

/// The linear and non-linear stages of an OAMP configuration.
#[derive(Debug, Clone)]
pub struct OampSe {
    pub le: LinearEstimator,
    pub nle: OrthogonalizedEstimator,
    pub prior: BernoulliGaussianPrior,
    pub quad: GaussianExpectation,
}

impl OampSe {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let d = geometric_spectrum(SpectrumSpec::new(cfg.m(), cfg.n, cfg.kappa))?;
        let kind = if cfg.algorithm.optimized_le() {
            LeKind::Optimized
        } else {
            LeKind::Lmmse
        };
        let b = if cfg.algorithm == Algorithm::Vamp {
            BStrategy::Ep
        } else {
            cfg.b_strategy
        };
        Ok(OampSe {
            le: LinearEstimator::new(kind, d, cfg.n, cfg.sigma2())?,
            nle: OrthogonalizedEstimator::new(DenoiserSpec::new(cfg.denoiser, cfg.threshold_rule), b),
            prior: BernoulliGaussianPrior::new(cfg.lambda)?,
            quad: GaussianExpectation::default(),
        })
    }

    /// From the previous non-linear output model to the next state.
    pub fn step(&self, phi: GsModel) -> Result<SeState> {
        let gamma = self.le.se(phi)?;
        let out = self.nle.se(&self.prior, gamma, &self.quad)?;
        Ok(SeState {
            alpha_gamma: gamma.alpha,
            v_gamma: gamma.v,
            alpha_phi: out.alpha,
            v_phi: out.v,
        })
    }

    pub fn run(&self, max_iters: usize, tol: f64) -> Result<SeTrajectory> {
        let mut states: Vec<SeState> = Vec::with_capacity(max_iters);
        let mut phi = GsModel::trivial();
        for t in 0..max_iters {
            let s = self.step(phi)?;
            if !(s.v_phi.is_finite() && s.alpha_phi.is_finite() && s.v_gamma < DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    iteration: t + 1,
                    what: "state evolution".into(),
                });
            }
            let prev = states.last().map(|p| p.v_phi);
            states.push(s);
            phi = s.phi();
            if let Some(p) = prev {
                if converged(p, s.v_phi, tol) {
                    return Ok(SeTrajectory {
                        fixed_point: Some(s),
                        states,
                        converged: true,
                    });
                }
            }
        }
        Ok(SeTrajectory {
            states,
            converged: false,
            fixed_point: None,
        })
    }
}

fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    if cur == 0.0 {
        return prev == 0.0 || tol > 0.0;
    }
    ((cur - prev) / cur).abs() < tol
}

/// State evolution of AMP with a raw (un-orthogonalized) denoiser.
///
/// `tau2_{t+1} = sigma2 + (n/m) E[(eta(x + tau_t z) - x)^2]`, starting from
/// `tau2_1 = sigma2 + n/m`.
#[derive(Debug, Clone)]
pub struct AmpSe {
    pub delta_inv: f64,
    pub sigma2: f64,
    pub denoiser: DenoiserSpec,
    pub prior: BernoulliGaussianPrior,
    pub quad: GaussianExpectation,
}

impl AmpSe {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(AmpSe {
            delta_inv: cfg.n as f64 / cfg.m() as f64,
            sigma2: cfg.sigma2(),
            denoiser: DenoiserSpec::new(cfg.denoiser, cfg.threshold_rule),
            prior: BernoulliGaussianPrior::new(cfg.lambda)?,
            quad: GaussianExpectation::default(),
        })
    }

    /// Raw denoiser output model and (n/m) E[eta'] for input variance `tau2`.
    pub fn denoise(&self, tau2: f64) -> Result<(GsModel, f64)> {
        let gs_in = GsModel::normalized(tau2)?;
        let den = self.denoiser.instantiate(&self.prior, gs_in)?;
        let m = moments(&den, &self.prior, 1.0, tau2, &self.quad)?;
        let alpha = m.efx;
        let out = GsModel::new(alpha, (m.eff - alpha * alpha).max(0.0))?;
        let b = self.delta_inv * m.edf.unwrap_or(m.b);
        Ok((out, b))
    }

    pub fn run(&self, max_iters: usize, tol: f64) -> Result<SeTrajectory> {
        let mut states: Vec<SeState> = Vec::new();
        let mut tau2 = self.sigma2 + self.delta_inv;
        for t in 0..max_iters {
            if tau2.is_nan() || tau2 >= DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    iteration: t + 1,
                    what: "AMP state evolution".into(),
                });
            }
            let (phi, _) = self.denoise(tau2)?;
            let s = SeState {
                alpha_gamma: 1.0,
                v_gamma: tau2,
                alpha_phi: phi.alpha,
                v_phi: phi.v,
            };
            if !s.v_phi.is_finite() {
                return Err(Error::Divergence {
                    iteration: t + 1,
                    what: "AMP state evolution".into(),
                });
            }
            let prev = states.last().map(|p| p.v_phi);
            states.push(s);
            if let Some(p) = prev {
                if converged(p, s.v_phi, tol) {
                    return Ok(SeTrajectory {
                        fixed_point: Some(s),
                        states,
                        converged: true,
                    });
                }
            }
            // raw error of eta: (alpha - 1)^2 + v
            let raw = (phi.alpha - 1.0).powi(2) + phi.v;
            tau2 = self.sigma2 + self.delta_inv * raw;
        }
        Ok(SeTrajectory {
            states,
            converged: false,
            fixed_point: None,
        })
    }
}

/// State evolution for the algorithm selected in `cfg`. Iteration stops
/// when the relative change of `v_phi` drops below `tol`.
pub fn run_se(cfg: &ExperimentConfig, max_iters: usize, tol: f64) -> Result<SeTrajectory> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Amp => AmpSe::from_config(cfg)?.run(max_iters, tol),
        _ => OampSe::from_config(cfg)?.run(max_iters, tol),
    }
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;
