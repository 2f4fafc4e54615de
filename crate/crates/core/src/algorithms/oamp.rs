//! OAMP drivers: the SVD form, the operator (W) form and VAMP.

use serde::{Deserialize, Serialize};

use super::diagnostics::{excess_kurtosis, normalized_corr};
use super::{check_finite, AlgorithmSpec, IterationRecord, Message, Trajectory};
use crate::config::{BStrategy, VarianceSource};
use crate::error::Result;
use crate::estimators::{LinearEstimator, OrthogonalizedEstimator};
use crate::linalg::SvdSystem;
use crate::model::{gs_decompose, mse_from_gs, BernoulliGaussianPrior, GsModel};
use crate::quadrature::GaussianExpectation;
use crate::rng::child_seed;

/// How the linear step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeForm {
    /// In the right-singular basis.
    Svd,
    /// Through `A`, `A^T` and the Gram solve.
    Operator,
}

/// The two local estimators of one OAMP instance bound to a system.
pub struct Oamp<'a> {
    pub sys: &'a SvdSystem,
    pub le: LinearEstimator,
    pub nle: OrthogonalizedEstimator,
    pub prior: BernoulliGaussianPrior,
    pub form: LeForm,
    pub variance_source: VarianceSource,
    quad: GaussianExpectation,
}

impl<'a> Oamp<'a> {
    pub fn new(sys: &'a SvdSystem, spec: &AlgorithmSpec, form: LeForm) -> Result<Self> {
        Ok(Oamp {
            sys,
            le: LinearEstimator::from_system(spec.le, sys)?,
            nle: spec.nle,
            prior: spec.prior,
            form,
            variance_source: spec.variance_source,
            quad: GaussianExpectation::default(),
        })
    }

    fn oracle(&self, value: &[f64], tracked: GsModel) -> Result<GsModel> {
        match self.variance_source {
            VarianceSource::Se => Ok(tracked),
            VarianceSource::Oracle => Ok(gs_decompose(value, &self.sys.x_true)?.0),
        }
    }

    /// gamma: s -> r
    pub fn le_step(&self, msg: &Message) -> Result<Message> {
        let (value, gs) = match self.form {
            LeForm::Svd => self.le.apply_svd(self.sys, &msg.value, msg.gs)?,
            LeForm::Operator => self.le.apply_operator(self.sys, &msg.value, msg.gs)?,
        };
        let gs = self.oracle(&value, gs)?;
        Ok(Message { value, gs, b: 1.0 })
    }

    /// phi: r -> s. `t` (1-based) picks the Monte-Carlo stream.
    pub fn nle_step(&self, msg: &Message, t: usize) -> Result<Message> {
        let seed = child_seed(self.sys.seed, t as u64);
        let out = self.nle.apply(&self.prior, &msg.value, msg.gs, seed, &self.quad)?;
        let gs = self.oracle(&out.value, out.gs)?;
        Ok(Message {
            value: out.value,
            gs,
            b: out.b,
        })
    }

    /// Zero estimate.
    pub fn initial(&self) -> Message {
        Message {
            value: vec![0.0; self.sys.n()],
            gs: GsModel::trivial(),
            b: 0.0,
        }
    }

    /// Serial schedule: `r_1, s_1, r_2, s_2, ...`.
    pub fn serial_messages(&self, iterations: usize) -> Result<Vec<Message>> {
        let mut out = Vec::with_capacity(2 * iterations);
        let mut s = self.initial();
        for t in 1..=iterations {
            let r = self.le_step(&s)?;
            check_finite(&r.value, t, "linear step")?;
            s = self.nle_step(&r, t)?;
            check_finite(&s.value, t, "non-linear step")?;
            out.push(r);
            out.push(s.clone());
        }
        Ok(out)
    }

    /// Parallel schedule: both estimators fire every step on each other's
    /// previous output. Returns the messages of both interleaved chains: the
    /// one that starts with the linear step, then the other.
    pub fn parallel_messages(&self, steps: usize) -> Result<(Vec<Message>, Vec<Message>)> {
        let zero_r = Message {
            value: vec![0.0; self.sys.n()],
            gs: GsModel::normalized(1.0)?,
            b: 0.0,
        };
        let mut le_in = self.initial();
        let mut nle_in = zero_r;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in 1..=steps {
            let r = self.le_step(&le_in)?;
            let s = self.nle_step(&nle_in, k.div_ceil(2))?;
            // odd steps advance chain A's linear step, even steps its non-linear one
            if k % 2 == 1 {
                a.push(r.clone());
                b.push(s.clone());
            } else {
                a.push(s.clone());
                b.push(r.clone());
            }
            le_in = s;
            nle_in = r;
        }
        Ok((a, b))
    }

    /// Runs `iterations` serial iterations and records diagnostics.
    pub fn run(&self, iterations: usize) -> Result<Trajectory> {
        let x = &self.sys.x_true;
        let n = x.len() as f64;
        let mut records = Vec::with_capacity(iterations);
        let mut nle_inputs: Vec<Vec<f64>> = Vec::new();
        let mut le_inputs: Vec<Vec<f64>> = Vec::new();
        let mut s = self.initial();
        for t in 1..=iterations {
            if t > 1 {
                le_inputs.push(gs_decompose(&s.value, x)?.1);
            }
            let r = self.le_step(&s)?;
            check_finite(&r.value, t, "linear step")?;
            let (_, r_res) = gs_decompose(&r.value, x)?;
            let le_cross = le_inputs.iter().map(|g| normalized_corr(g, &r_res)).collect();
            let le_err: Vec<f64> = r.value.iter().zip(x).map(|(a, b)| a - r.gs.alpha * b).collect();
            let le_signal_corr = normalized_corr(x, &le_err);
            let kurtosis = excess_kurtosis(&r_res);
            nle_inputs.push(r_res);

            let next = self.nle_step(&r, t)?;
            check_finite(&next.value, t, "non-linear step")?;
            let (g_emp, s_res) = gs_decompose(&next.value, x)?;
            let nle_cross = nle_inputs.iter().map(|f| normalized_corr(f, &s_res)).collect();
            let f_out: Vec<f64> = next.value.iter().zip(x).map(|(a, b)| a - next.gs.alpha * b).collect();
            let signal_corr = normalized_corr(x, &f_out);
            let raw_mse = next.value.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
            records.push(IterationRecord {
                iter: t,
                alpha_gamma: r.gs.alpha,
                v_gamma: r.gs.v,
                alpha_phi: next.gs.alpha,
                v_phi: next.gs.v,
                b: next.b,
                gs_mse: mse_from_gs(g_emp).map(|p| p.1).unwrap_or(1.0),
                raw_mse,
                se_mse: mse_from_gs(next.gs).map(|p| p.1).unwrap_or(1.0),
                nle_cross,
                le_cross,
                signal_corr,
                le_signal_corr,
                kurtosis,
            });
            s = next;
        }
        Ok(Trajectory {
            records,
            seed: self.sys.seed,
        })
    }
}

/// OAMP with the linear step evaluated in the SVD basis.
pub fn run_oamp_svd(sys: &SvdSystem, spec: &AlgorithmSpec) -> Result<Trajectory> {
    Oamp::new(sys, spec, LeForm::Svd)?.run(spec.iterations)
}

/// OAMP through the operator form. The `vamp` kind is this with the EP
/// coefficient.
pub fn run_oamp_w(sys: &SvdSystem, spec: &AlgorithmSpec) -> Result<Trajectory> {
    let mut spec = spec.clone();
    if spec.kind == super::AlgorithmKind::Vamp {
        spec.nle = OrthogonalizedEstimator::new(spec.nle.prototype, BStrategy::Ep);
    }
    Oamp::new(sys, &spec, LeForm::Operator)?.run(spec.iterations)
}
