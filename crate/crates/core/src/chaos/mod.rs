//! Polynomial chaos expansions: total-degree bases of orthonormal Legendre
//! and Hermite polynomials, least-squares coefficient fits, and the moments
//! and Sobol' indices that fall out of the coefficients.

mod basis;
mod pce;

pub use basis::{basis_size, total_degree_indices, BasisSet, Family, MultiIndex};
pub use pce::{fit_regression, FitDiagnostics, PceFitter, PceModel};

/// Default ratio of regression samples to basis terms.
pub const DEFAULT_OVERSAMPLING: usize = 2;

/// Number of samples the default oversampling asks for with `n` inputs at order `p`.
pub fn regression_budget(n: usize, p: usize) -> Option<usize> {
    basis_size(n, p)?.checked_mul(DEFAULT_OVERSAMPLING)
}
