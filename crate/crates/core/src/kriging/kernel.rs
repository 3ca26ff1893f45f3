use alloc::vec::Vec;
use core::str::FromStr;

use crate::linalg::{Cholesky, Matrix};
use crate::math;
use crate::{Error, Result};

/// Diagonal jitter added to the correlation matrix unless stated otherwise.
pub const DEFAULT_NUGGET: f64 = 1e-10;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `exp(−Σ (Δ_k / θ_k)²)`
    SquaredExponential,
    /// `(1 + √5 h + 5h²/3) exp(−√5 h)` with `h² = Σ (Δ_k / θ_k)²`
    Matern52,
}

impl KernelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SquaredExponential => "sqexp",
            Self::Matern52 => "matern52",
        }
    }

    /// Correlation as a function of the scaled squared distance `h²`.
    #[inline]
    pub fn from_scaled_sq(&self, h2: f64) -> f64 {
        match self {
            Self::SquaredExponential => math::exp_neg(h2),
            Self::Matern52 => {
                let h = math::sqrt(h2);
                (1.0 + SQRT5 * h + 5.0 / 3.0 * h2) * math::exp_neg(SQRT5 * h)
            }
        }
    }

    /// [`from_scaled_sq`](Self::from_scaled_sq) over a slice, in place.
    pub fn from_scaled_sq_in_place(&self, h2: &mut [f64]) {
        match self {
            Self::SquaredExponential => h2.iter_mut().for_each(|v| *v = math::exp_neg(*v)),
            Self::Matern52 => h2.iter_mut().for_each(|v| {
                let h = math::sqrt(*v);
                *v = (1.0 + SQRT5 * h + 5.0 / 3.0 * *v) * math::exp_neg(SQRT5 * h);
            }),
        }
    }

    /// `∂R/∂ρ_k = factor · Δ_k² / θ_k²`, `ρ_k = ln θ_k`; returns the factor.
    #[inline]
    pub(crate) fn log_scale_derivative_factor(&self, h2: f64, r: f64) -> f64 {
        match self {
            Self::SquaredExponential => 2.0 * r,
            Self::Matern52 => {
                let h = math::sqrt(h2);
                5.0 / 3.0 * (1.0 + SQRT5 * h) * r / (1.0 + SQRT5 * h + 5.0 / 3.0 * h2)
            }
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqexp" | "squared-exponential" | "gaussian" => Ok(Self::SquaredExponential),
            "matern52" | "matern-5/2" | "matern" => Ok(Self::Matern52),
            other => Err(Error::InvalidArgument(alloc::format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Anisotropic stationary correlation function with per-dimension length scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    theta: Vec<f64>,
    inv_sq: Vec<f64>,
    nugget: f64,
}

/// `1 / θ_k²`, shared with the likelihood code so both build bit-identical matrices.
pub(crate) fn inverse_squares(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| 1.0 / (t * t)).collect()
}

impl Kernel {
    pub fn new(family: KernelFamily, theta: Vec<f64>, nugget: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one length scale".into()));
        }
        if let Some(t) = theta.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(alloc::format!("length scale {t} is not positive")));
        }
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("nugget {nugget} is negative")));
        }
        Ok(Self { family, inv_sq: inverse_squares(&theta), theta, nugget })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `R(a, b; θ)` without the nugget.
    #[inline]
    pub fn correlation(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut h2 = 0.0;
        for ((x, y), w) in a.iter().zip(b).zip(&self.inv_sq) {
            let d = x - y;
            h2 += d * d * w;
        }
        self.family.from_scaled_sq(h2)
    }
}

/// Correlation matrix of the rows of `x`, nugget on the diagonal.
pub fn correlation_matrix(kernel: &Kernel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), found: x.cols() });
    }
    let n = x.rows();
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0 + kernel.nugget;
        for j in 0..i {
            let v = kernel.correlation(x.row(i), x.row(j));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Cholesky of a correlation matrix; failures name a duplicated design pair when there is one.
pub(crate) fn factor_correlation(r: &Matrix, x: &Matrix) -> Result<Cholesky> {
    Cholesky::new(r).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, .. } => Error::NotPositiveDefinite { pivot, duplicate: find_duplicate(x) },
        other => other,
    })
}

fn find_duplicate(x: &Matrix) -> Option<(usize, usize)> {
    (0..x.rows()).find_map(|i| (0..i).find(|&j| x.row(i) == x.row(j)).map(|j| (j, i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn closed_forms() {
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![1.0], 0.0).unwrap();
        assert!((k.correlation(&[0.0], &[1.0]) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(k.correlation(&[0.0], &[1e3]) == 0.0);
        let m = Kernel::new(KernelFamily::Matern52, vec![2.0], 0.0).unwrap();
        let h = 0.5f64;
        let expect = (1.0 + 5f64.sqrt() * h + 5.0 * h * h / 3.0) * (-(5f64.sqrt()) * h).exp();
        assert!((m.correlation(&[1.0], &[2.0]) - expect).abs() < 1e-15);
        assert_eq!(m.correlation(&[0.3], &[0.3]), 1.0);
    }

    #[test]
    fn anisotropic_scaling() {
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![0.5, 2.0], 0.0).unwrap();
        let expect = (-(0.4f64 / 0.5).powi(2) - (1.0f64 / 2.0).powi(2)).exp();
        assert!((k.correlation(&[0.0, 0.0], &[0.4, 1.0]) - expect).abs() < 1e-15);
    }

    #[test]
    fn matrix_diagonal_and_symmetry() {
        let x = Matrix::from_fn(6, 2, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0);
        for fam in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
            let k = Kernel::new(fam, vec![0.3, 0.8], 1e-6).unwrap();
            let r = correlation_matrix(&k, &x).unwrap();
            for i in 0..6 {
                assert_eq!(r[(i, i)], 1.0 + 1e-6);
                for j in 0..6 {
                    assert_eq!(r[(i, j)], r[(j, i)]);
                }
            }
            assert!(Cholesky::new(&r).is_ok());
        }
    }

    #[test]
    fn duplicate_points_reported() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.5, 0.1], [0.0, 0.0]]).unwrap();
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![1.0, 1.0], 0.0).unwrap();
        let r = correlation_matrix(&k, &x).unwrap();
        match factor_correlation(&r, &x) {
            Err(Error::NotPositiveDefinite { duplicate: Some((0, 2)), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(Kernel::new(KernelFamily::Matern52, vec![0.0], 0.0).is_err());
        assert!(Kernel::new(KernelFamily::Matern52, vec![], 0.0).is_err());
        assert!(Kernel::new(KernelFamily::Matern52, vec![1.0], -1.0).is_err());
        assert_eq!("matern52".parse::<KernelFamily>().unwrap(), KernelFamily::Matern52);
        assert!("rbf2".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn log_scale_derivative_matches_finite_difference() {
        for fam in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
            let (d, theta) = (0.7f64, 0.9f64);
            let r_at = |rho: f64| fam.from_scaled_sq((d / rho.exp()).powi(2));
            let rho = theta.ln();
            let fd = (r_at(rho + 1e-6) - r_at(rho - 1e-6)) / 2e-6;
            let h2 = (d / theta).powi(2);
            let an = fam.log_scale_derivative_factor(h2, fam.from_scaled_sq(h2)) * d * d / (theta * theta);
            assert!((fd - an).abs() < 1e-8, "{fam:?}: {fd} vs {an}");
        }
    }
}
