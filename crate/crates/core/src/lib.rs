#![cfg_attr(not(feature = "std"), no_std)]

//! Surrogate-based uncertainty quantification for black-box models.
//!
//! The crate builds polynomial chaos expansions, Kriging (Gaussian process)
//! models and PC-Kriging hybrids from a design of experiments, and extracts
//! moments and Sobol' sensitivity indices from them. Everything here is pure
//! computation on in-memory data and works without `std` (an allocator is
//! required). File formats, the external solver runner and the command line
//! live in the `uqforge` crate.
//!
//! Enable the `std` feature to route elementary functions through the
//! platform math library instead of `libm`.

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod chaos;
pub mod doe;
pub mod kriging;
pub mod linalg;
pub mod models;
pub mod pck;
pub mod quadrature;
pub mod sensitivity;
pub mod space;
pub mod special;

pub use error::{Error, Result};

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
