//! Local estimators: denoisers, their orthogonalization, and the linear step.

pub mod denoiser;
pub mod gso;
pub mod linear;

pub use denoiser::{bg_mmse_denoise, soft_threshold, BlackBox, Denoiser, DenoiserSpec};
pub use gso::{
    compute_b_derivative, compute_b_derivative_expectation, compute_b_ep, compute_b_integral,
    compute_b_montecarlo, moments, orthogonalize, CRule, Moments, NleOutput, OrthogonalizedEstimator,
};
pub use linear::{LeKind, LinearEstimator};
