//! Random matrix generation and the SVD-form linear operator.

pub mod haar;
pub mod spectrum;
pub mod system;

pub use haar::{sample_haar, sample_haar_dense, OrthogonalMatrix};
pub use spectrum::{geometric_spectrum, SpectrumSpec};
pub use system::{DenseSystem, SensingOperator, SvdSystem};
