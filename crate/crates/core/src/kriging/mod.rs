//! Kriging (Gaussian-process) metamodels with a regression trend.
//!
//! The predictor is the universal-Kriging one: a generalised-least-squares
//! trend `fᵀβ` plus a stationary Gaussian process with anisotropic
//! correlation `R(x, x'; θ)`. Every solve goes through one Cholesky
//! factorisation `R = L Lᵀ` and a pivoted QR of the whitened trend matrix
//! `L⁻¹F`; no explicit inverse is formed on the prediction path.

mod kernel;
mod mle;
mod model;
mod trend;

pub use kernel::{correlation_matrix, Kernel, KernelFamily, DEFAULT_NUGGET};
pub use mle::{mle_train, MleOptions, MleReport, StartReport};
pub use model::{fit_given_theta, KrigingModel, LooReport, Prediction};
pub use trend::Trend;
