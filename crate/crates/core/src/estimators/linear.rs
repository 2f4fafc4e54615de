//! The LMMSE linear step and its optimized variant, evaluated in the SVD basis.
//!
//! With `W = v A^T (v A A^T + sigma2 I)^{-1}` the step is
//! `r = xi s + (n / tr(W A)) W (y - xi A s)`. The standard step uses `xi = 1`;
//! the optimized step picks `xi = alpha / (alpha^2 + v)` from the input model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SvdSystem;
use crate::model::GsModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeKind {
    Lmmse,
    Optimized,
    /// `r = s + A^T (y - A s)`, the linear step of AMP.
    MatchedFilter,
}

/// Spectral quantities of the step at one input variance.
#[derive(Debug, Clone)]
pub struct LeCoefficients {
    /// `c v d_i / (v d_i^2 + sigma2)`: the normalized filter in the SVD basis.
    pub gain: Vec<f64>,
    /// n / tr(W A)
    pub c: f64,
    /// tr(B B^T) / n with B = I - c W A
    pub t1: f64,
    /// tr(W~ W~^T) / n with W~ = c W
    pub t2: f64,
}

#[derive(Debug, Clone)]
pub struct LinearEstimator {
    pub kind: LeKind,
    d: Vec<f64>,
    n: usize,
    sigma2: f64,
}

impl LinearEstimator {
    pub fn new(kind: LeKind, d: Vec<f64>, n: usize, sigma2: f64) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        if d.len() > n {
            return Err(Error::InvalidDimension(format!("m = {} exceeds n = {n}", d.len())));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::InvalidVariance(sigma2));
        }
        Ok(LinearEstimator { kind, d, n, sigma2 })
    }

    pub fn from_system(kind: LeKind, sys: &SvdSystem) -> Result<Self> {
        Self::new(kind, sys.d.clone(), sys.n(), sys.sigma2)
    }

    /// `(xi, v_eff)`: the input scaling and the error power of `xi s`.
    pub fn effective(&self, gs: GsModel) -> Result<(f64, f64)> {
        if gs.is_trivial() {
            // zero estimate: the error is the unit-power signal itself
            let xi = if self.kind == LeKind::Optimized { 0.0 } else { 1.0 };
            return Ok((xi, 1.0));
        }
        match self.kind {
            LeKind::Optimized => {
                let den = gs.alpha * gs.alpha + gs.v;
                if den <= 0.0 {
                    return Err(Error::DegenerateModel { alpha: gs.alpha, v: gs.v });
                }
                Ok((gs.alpha / den, gs.v / den))
            }
            _ => Ok((1.0, (gs.alpha - 1.0).powi(2) + gs.v)),
        }
    }

    pub fn coefficients(&self, v_eff: f64) -> LeCoefficients {
        let n = self.n as f64;
        let m = self.d.len();
        if v_eff <= 0.0 {
            return LeCoefficients {
                gain: vec![0.0; m],
                c: 1.0,
                t1: 0.0,
                t2: 0.0,
            };
        }
        let lam: Vec<f64> = self
            .d
            .iter()
            .map(|d| v_eff * d * d / (v_eff * d * d + self.sigma2))
            .collect();
        let c = n / lam.iter().sum::<f64>();
        let gain: Vec<f64> = self
            .d
            .iter()
            .map(|d| c * v_eff * d / (v_eff * d * d + self.sigma2))
            .collect();
        let t1 = (lam.iter().map(|l| (1.0 - c * l).powi(2)).sum::<f64>() + (self.n - m) as f64) / n;
        let t2 = gain.iter().map(|g| g * g).sum::<f64>() / n;
        LeCoefficients { gain, c, t1, t2 }
    }

    /// State evolution: the output model is `(1, t1 v_eff + t2 sigma2)`.
    pub fn se(&self, gs: GsModel) -> Result<GsModel> {
        if self.kind == LeKind::MatchedFilter {
            return Err(Error::UnsupportedStrategy(
                "the matched filter has no stand-alone state evolution".into(),
            ));
        }
        let (_, v_eff) = self.effective(gs)?;
        let k = self.coefficients(v_eff);
        GsModel::normalized(k.t1 * v_eff + k.t2 * self.sigma2)
    }

    /// The step computed in the SVD basis: two multiplications by V.
    pub fn apply_svd(&self, sys: &SvdSystem, s: &[f64], gs: GsModel) -> Result<(Vec<f64>, GsModel)> {
        if self.kind == LeKind::MatchedFilter {
            return Ok((self.matched_filter(sys, s)?, gs));
        }
        let (xi, v_eff) = self.effective(gs)?;
        let k = self.coefficients(v_eff);
        let uy = sys.rotated_observation()?;
        let mut rt = sys.v.apply(s)?;
        for (i, r) in rt.iter_mut().enumerate() {
            *r *= xi;
            if i < sys.m() {
                *r += k.gain[i] * (uy[i] - sys.d[i] * *r);
            }
        }
        let r = sys.v.apply_transpose(&rt)?;
        Ok((r, GsModel::normalized(k.t1 * v_eff + k.t2 * self.sigma2)?))
    }

    /// The same step through `A`, `A^T` and the Gram solve.
    pub fn apply_operator(&self, sys: &SvdSystem, s: &[f64], gs: GsModel) -> Result<(Vec<f64>, GsModel)> {
        if self.kind == LeKind::MatchedFilter {
            return Ok((self.matched_filter(sys, s)?, gs));
        }
        let (xi, v_eff) = self.effective(gs)?;
        let k = self.coefficients(v_eff);
        let v_out = GsModel::normalized(k.t1 * v_eff + k.t2 * self.sigma2)?;
        let xs: Vec<f64> = s.iter().map(|a| xi * a).collect();
        if v_eff <= 0.0 {
            return Ok((xs, v_out));
        }
        let axs = sys.apply_forward(&xs)?;
        let e: Vec<f64> = sys.y.iter().zip(&axs).map(|(a, b)| a - b).collect();
        let z = sys.solve_gram(v_eff, self.sigma2, &e)?;
        let w = sys.apply_adjoint(&z)?;
        let scale = k.c * v_eff;
        let r = xs.iter().zip(&w).map(|(a, b)| a + scale * b).collect();
        Ok((r, v_out))
    }

    fn matched_filter(&self, sys: &SvdSystem, s: &[f64]) -> Result<Vec<f64>> {
        let as_ = sys.apply_forward(s)?;
        let e: Vec<f64> = sys.y.iter().zip(&as_).map(|(a, b)| a - b).collect();
        let back = sys.apply_adjoint(&e)?;
        Ok(s.iter().zip(&back).map(|(a, b)| a + b).collect())
    }
}

/// Standard LMMSE step with input error variance `v_s`.
pub fn lmmse_le(sys: &SvdSystem, s: &[f64], v_s: f64) -> Result<Vec<f64>> {
    if !(v_s.is_finite() && v_s > 0.0) {
        return Err(Error::InvalidVariance(v_s));
    }
    let le = LinearEstimator::from_system(LeKind::Lmmse, sys)?;
    Ok(le.apply_svd(sys, s, GsModel::normalized(v_s)?)?.0)
}

/// Optimized step; returns the output and its predicted error variance.
pub fn optimized_le(sys: &SvdSystem, s: &[f64], gs_s: GsModel) -> Result<(Vec<f64>, f64)> {
    if gs_s.alpha * gs_s.alpha + gs_s.v <= 0.0 {
        return Err(Error::DegenerateModel {
            alpha: gs_s.alpha,
            v: gs_s.v,
        });
    }
    let le = LinearEstimator::from_system(LeKind::Optimized, sys)?;
    let (r, g) = le.apply_svd(sys, s, gs_s)?;
    Ok((r, g.v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::linalg::{geometric_spectrum, SpectrumSpec};
    use crate::model::build_system;

    fn small_cfg(n: usize, ratio: f64, kappa: f64, snr: Option<f64>) -> ExperimentConfig {
        ExperimentConfig {
            n,
            m_over_n: ratio,
            kappa,
            snr_db: snr,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn noiseless_square_inverts() {
        let sys = build_system(&small_cfg(40, 1.0, 3.0, None), 1).unwrap();
        let r = lmmse_le(&sys, &vec![0.0; 40], 1.0).unwrap();
        for (a, b) in r.iter().zip(&sys.x_true) {
            assert!((a - b).abs() < 1e-9);
        }
        let le = LinearEstimator::from_system(LeKind::Lmmse, &sys).unwrap();
        assert!(le.se(GsModel::normalized(1.0).unwrap()).unwrap().v < 1e-12);
    }

    #[test]
    fn consistent_input_is_a_fixed_point() {
        let sys = build_system(&small_cfg(40, 0.6, 5.0, None), 2).unwrap();
        let r = lmmse_le(&sys, &sys.x_true, 0.3).unwrap();
        for (a, b) in r.iter().zip(&sys.x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_of_orthogonalized_step_is_zero() {
        let d = geometric_spectrum(SpectrumSpec::new(650, 1000, 10.0)).unwrap();
        let le = LinearEstimator::new(LeKind::Lmmse, d.clone(), 1000, 1e-3).unwrap();
        for v in [1.0, 0.1, 1e-3] {
            let k = le.coefficients(v);
            let tr_wa: f64 = d.iter().zip(&k.gain).map(|(d, g)| g * d).sum();
            // tr(I - c W A) = n - c tr(W A)
            assert!((1000.0 - tr_wa).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_unit_spectrum_is_awgn() {
        let le = LinearEstimator::new(LeKind::Lmmse, vec![1.0; 50], 50, 0.02).unwrap();
        for v in [1.0, 0.3, 1e-3] {
            let out = le.se(GsModel::normalized(v).unwrap()).unwrap();
            assert_eq!(out.alpha, 1.0);
            assert!((out.v - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn xi_arithmetic() {
        let le = LinearEstimator::new(LeKind::Optimized, vec![1.0; 4], 8, 0.1).unwrap();
        let (xi, v_eff) = le.effective(GsModel::new(0.5, 0.25).unwrap()).unwrap();
        assert!((xi - 1.0).abs() < 1e-15);
        assert!((v_eff - 0.5).abs() < 1e-15);
    }

    #[test]
    fn optimized_with_normalized_input_is_standard() {
        // alpha = 1 forces xi = 1 / (1 + v); feed the standard step the same
        // effective variance and scaled input to get the same output.
        let sys = build_system(&small_cfg(60, 0.7, 4.0, Some(30.0)), 3).unwrap();
        let s: Vec<f64> = sys.x_true.iter().map(|a| 0.8 * a + 0.05).collect();
        let gs = GsModel::normalized(0.25).unwrap();
        let (r_opt, v_opt) = optimized_le(&sys, &s, gs).unwrap();
        let xi = 1.0 / 1.25;
        let xs: Vec<f64> = s.iter().map(|a| xi * a).collect();
        let r_std = lmmse_le(&sys, &xs, 0.25 / 1.25).unwrap();
        for (a, b) in r_opt.iter().zip(&r_std) {
            assert!((a - b).abs() < 1e-10);
        }
        let le = LinearEstimator::from_system(LeKind::Lmmse, &sys).unwrap();
        let v_std = le.coefficients(0.2);
        assert!((v_opt - (v_std.t1 * 0.2 + v_std.t2 * sys.sigma2)).abs() < 1e-14);
    }

    #[test]
    fn svd_and_operator_forms_agree() {
        let sys = build_system(&small_cfg(50, 0.65, 10.0, Some(45.0)), 4).unwrap();
        let s: Vec<f64> = sys.x_true.iter().map(|a| 0.7 * a).collect();
        for kind in [LeKind::Lmmse, LeKind::Optimized, LeKind::MatchedFilter] {
            let le = LinearEstimator::from_system(kind, &sys).unwrap();
            let gs = GsModel::new(0.7, 0.05).unwrap();
            let (a, ga) = le.apply_svd(&sys, &s, gs).unwrap();
            let (b, gb) = le.apply_operator(&sys, &s, gs).unwrap();
            assert_eq!(ga, gb);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10, "{kind:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LinearEstimator::new(LeKind::Lmmse, vec![], 4, 0.1).is_err());
        let sys = build_system(&small_cfg(20, 0.5, 2.0, Some(20.0)), 5).unwrap();
        assert!(lmmse_le(&sys, &[0.0; 20], 0.0).is_err());
        assert!(optimized_le(&sys, &[0.0; 20], GsModel::trivial()).is_err());
    }
}
