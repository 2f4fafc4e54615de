//! AMP: matched-filter linear step with the Onsager memory term.

use super::diagnostics::{excess_kurtosis, normalized_corr};
use super::{check_finite, AlgorithmSpec, IterationRecord, Trajectory};
use crate::config::VarianceSource;
use crate::error::{Error, Result};
use crate::linalg::SensingOperator;
use crate::model::{gs_decompose, mse_from_gs, GsModel};
use crate::se::AmpSe;

/// `b_prev (x_in_prev - s_prev)`.
pub fn compute_onsager(b_prev: f64, x_in_prev: &[f64], s_prev: &[f64]) -> Result<Vec<f64>> {
    if x_in_prev.len() != s_prev.len() {
        return Err(Error::DimensionMismatch {
            expected: x_in_prev.len(),
            got: s_prev.len(),
        });
    }
    Ok(x_in_prev.iter().zip(s_prev).map(|(a, b)| b_prev * (a - b)).collect())
}

/// Runs AMP on any sensing operator. `x_true` is used for diagnostics and
/// for the oracle variance source only.
pub fn run_amp<S: SensingOperator>(
    sys: &S,
    y: &[f64],
    x_true: &[f64],
    sigma2: f64,
    seed: u64,
    spec: &AlgorithmSpec,
) -> Result<Trajectory> {
    let n = sys.cols();
    let m = sys.rows();
    let delta_inv = n as f64 / m as f64;
    let amp_se = AmpSe {
        delta_inv,
        sigma2,
        denoiser: spec.nle.prototype,
        prior: spec.prior,
        quad: Default::default(),
    };
    let tracked = amp_se.run(spec.iterations, 0.0)?;
    let mut s = vec![0.0; n];
    let mut prev: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut records = Vec::with_capacity(spec.iterations);
    let mut nle_inputs: Vec<Vec<f64>> = Vec::new();
    let nf = n as f64;
    for t in 1..=spec.iterations {
        let as_ = sys.forward(&s)?;
        let e: Vec<f64> = y.iter().zip(&as_).map(|(a, b)| a - b).collect();
        let back = sys.adjoint(&e)?;
        let mut x_in: Vec<f64> = s.iter().zip(&back).map(|(a, b)| a + b).collect();
        if let Some((b_prev, x_prev, s_prev)) = &prev {
            let ons = compute_onsager(*b_prev, x_prev, s_prev)?;
            for (a, o) in x_in.iter_mut().zip(&ons) {
                *a += o;
            }
        }
        check_finite(&x_in, t, "AMP linear step")?;
        let state = tracked.states[t - 1];
        let tau2 = match spec.variance_source {
            VarianceSource::Se => state.v_gamma,
            VarianceSource::Oracle => x_in.iter().zip(x_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / nf,
        };
        let den = spec.nle.prototype.instantiate(&spec.prior, GsModel::normalized(tau2)?)?;
        let s_next = den.apply(&x_in);
        check_finite(&s_next, t, "AMP denoiser")?;
        let mut slope = 0.0;
        for &a in &x_in {
            slope += den.derivative(a)?;
        }
        let b = delta_inv * slope / nf;

        let (_, in_res) = gs_decompose(&x_in, x_true)?;
        let (g_emp, out_res) = gs_decompose(&s_next, x_true)?;
        let kurtosis = excess_kurtosis(&in_res);
        nle_inputs.push(in_res);
        let nle_cross = nle_inputs.iter().map(|f| normalized_corr(f, &out_res)).collect();
        let f_out: Vec<f64> = s_next.iter().zip(x_true).map(|(a, b)| a - state.alpha_phi * b).collect();
        records.push(IterationRecord {
            iter: t,
            alpha_gamma: 1.0,
            v_gamma: tau2,
            alpha_phi: state.alpha_phi,
            v_phi: state.v_phi,
            b,
            gs_mse: mse_from_gs(g_emp).map(|p| p.1).unwrap_or(1.0),
            raw_mse: s_next.iter().zip(x_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / nf,
            se_mse: state.mse(),
            nle_cross,
            le_cross: Vec::new(),
            signal_corr: normalized_corr(x_true, &f_out),
            le_signal_corr: f64::NAN,
            kurtosis,
        });
        prev = Some((b, x_in, s.clone()));
        s = s_next;
    }
    Ok(Trajectory { records, seed })
}
