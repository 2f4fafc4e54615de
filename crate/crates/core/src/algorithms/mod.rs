//! Iteration drivers and their per-iteration records.

pub mod amp;
pub mod diagnostics;
pub mod oamp;

use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, BStrategy, ExperimentConfig, SpectrumKind, VarianceSource};
use crate::error::{Error, Result};
use crate::estimators::{DenoiserSpec, LeKind, OrthogonalizedEstimator};
use crate::model::{build_dense_system, build_system, BernoulliGaussianPrior, GsModel};

pub use amp::{compute_onsager, run_amp};
pub use oamp::{run_oamp_svd, run_oamp_w, LeForm, Oamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmKind {
    OampSvd,
    OampW,
    Amp,
    Vamp,
}

/// Everything a driver needs besides the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub le: LeKind,
    pub nle: OrthogonalizedEstimator,
    pub prior: BernoulliGaussianPrior,
    pub iterations: usize,
    pub variance_source: VarianceSource,
}

impl AlgorithmSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let (kind, le) = match cfg.algorithm {
            Algorithm::Se => {
                return Err(Error::Config("algorithm = se has no simulation".into()));
            }
            Algorithm::OampSvd => (AlgorithmKind::OampSvd, LeKind::Lmmse),
            Algorithm::OampSvdOptimized => (AlgorithmKind::OampSvd, LeKind::Optimized),
            Algorithm::OampW => (AlgorithmKind::OampW, LeKind::Lmmse),
            Algorithm::OampWOptimized => (AlgorithmKind::OampW, LeKind::Optimized),
            Algorithm::Vamp => (AlgorithmKind::Vamp, LeKind::Lmmse),
            Algorithm::Amp => (AlgorithmKind::Amp, LeKind::MatchedFilter),
        };
        let b = match kind {
            AlgorithmKind::Vamp => BStrategy::Ep,
            // AMP applies the prototype raw; the Onsager term does the correcting
            AlgorithmKind::Amp => BStrategy::Zero,
            _ => cfg.b_strategy,
        };
        Ok(AlgorithmSpec {
            kind,
            le,
            nle: OrthogonalizedEstimator::new(DenoiserSpec::new(cfg.denoiser, cfg.threshold_rule), b),
            prior: BernoulliGaussianPrior::new(cfg.lambda)?,
            iterations: cfg.iterations,
            variance_source: cfg.variance_source,
        })
    }
}

/// A vector passed between the two estimators with its GS model.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub value: Vec<f64>,
    pub gs: GsModel,
    /// Orthogonalization coefficient used to produce this message.
    pub b: f64,
}

/// Tracked and measured quantities of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub alpha_gamma: f64,
    pub v_gamma: f64,
    pub alpha_phi: f64,
    pub v_phi: f64,
    pub b: f64,
    /// MSE of the best scaling of the non-linear output, measured.
    pub gs_mse: f64,
    /// `|s - x|^2 / n`
    pub raw_mse: f64,
    /// The same MSE predicted from the tracked model.
    pub se_mse: f64,
    /// Correlation of this non-linear output error with every non-linear
    /// input error so far (oldest first).
    pub nle_cross: Vec<f64>,
    /// Same for the linear step; empty on the first iteration.
    pub le_cross: Vec<f64>,
    /// Correlation of `x` with `s - alpha_phi x`.
    pub signal_corr: f64,
    /// Correlation of `x` with `r - alpha_gamma x`.
    pub le_signal_corr: f64,
    /// Excess kurtosis of the non-linear input error.
    pub kurtosis: f64,
}

impl IterationRecord {
    /// Largest absolute correlation among all recorded pairs.
    pub fn ortho_corr(&self) -> f64 {
        self.nle_cross
            .iter()
            .chain(&self.le_cross)
            .chain([&self.signal_corr, &self.le_signal_corr])
            .filter(|c| c.is_finite())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub seed: u64,
}

impl Trajectory {
    pub fn gs_mse(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gs_mse).collect()
    }

    pub fn raw_mse(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.raw_mse).collect()
    }
}

/// Mean square above which an iterate counts as diverged (unit-power signals).
pub const DIVERGENCE_LIMIT: f64 = 1e12;

pub(crate) fn check_finite(v: &[f64], iteration: usize, what: &str) -> Result<()> {
    let ms = v.iter().map(|a| a * a).sum::<f64>() / v.len().max(1) as f64;
    if !ms.is_finite() {
        return Err(Error::Divergence {
            iteration,
            what: format!("non-finite value in {what}"),
        });
    }
    if ms > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            iteration,
            what: format!("{what} mean square {ms:.3e} exceeds {DIVERGENCE_LIMIT:.0e}"),
        });
    }
    Ok(())
}

/// Samples the system for `seed` and runs the configured algorithm.
pub fn run_algorithm(cfg: &ExperimentConfig, seed: u64) -> Result<Trajectory> {
    let spec = AlgorithmSpec::from_config(cfg)?;
    match (spec.kind, cfg.spectrum) {
        (AlgorithmKind::Amp, SpectrumKind::IidgSample) => {
            let sys = build_dense_system(cfg, seed)?;
            run_amp(&sys, &sys.y, &sys.x_true, sys.sigma2, seed, &spec)
        }
        (_, SpectrumKind::IidgSample) => Err(Error::Config(
            "spectrum = iidg-sample is only supported with algorithm = amp".into(),
        )),
        (AlgorithmKind::Amp, _) => {
            let sys = build_system(cfg, seed)?;
            run_amp(&sys, &sys.y, &sys.x_true, sys.sigma2, seed, &spec)
        }
        (AlgorithmKind::OampSvd, _) => run_oamp_svd(&build_system(cfg, seed)?, &spec),
        (AlgorithmKind::OampW | AlgorithmKind::Vamp, _) => run_oamp_w(&build_system(cfg, seed)?, &spec),
    }
}
