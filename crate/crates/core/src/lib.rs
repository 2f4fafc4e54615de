pub mod algorithms;
pub mod config;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod se;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use model::{gs_decompose, mse_from_gs, BernoulliGaussianPrior, GsModel};
