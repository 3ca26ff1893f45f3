use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::basis::BasisSet;
use crate::doe::{DesignForm, DesignMatrix};
use crate::linalg::{Matrix, PivotedQr};
use crate::sensitivity::{Estimator, SobolIndices};
use crate::space::ParameterSpace;
use crate::{Error, Result};

/// Regressions whose pivoted-QR condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Quality measures recorded by a regression fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub samples: usize,
    /// `‖Ψa − y‖₂`
    pub residual_norm: f64,
    pub condition_estimate: f64,
    /// Mean squared leave-one-out residual over the sample variance of `y`
    /// (the raw mean square when `y` is constant). Infinite when some sample
    /// has unit leverage.
    pub loo_error: f64,
}

/// Fitted expansion `M(ξ) = Σ a_b ψ_b(ξ)` over standard coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PceModel {
    space: ParameterSpace,
    basis: BasisSet,
    coeffs: Vec<f64>,
    diagnostics: Option<FitDiagnostics>,
}

impl PceModel {
    pub fn new(space: ParameterSpace, basis: BasisSet, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: coeffs.len() });
        }
        if space.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: basis.dim() });
        }
        Ok(Self { space, basis, coeffs, diagnostics: None })
    }

    pub fn with_diagnostics(mut self, diagnostics: FitDiagnostics) -> Self {
        self.diagnostics = Some(diagnostics);
        self
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// Prediction at a standard-domain point.
    pub fn predict(&self, xi: &[f64]) -> Result<f64> {
        let psi = self.basis.eval(xi)?;
        Ok(crate::linalg::dot(&psi, &self.coeffs))
    }

    pub fn predict_physical(&self, x: &[f64]) -> Result<f64> {
        self.predict(&self.space.to_standard(x)?)
    }

    /// `(E[Y], V[Y]) = (a₀, Σ_{b≠0} a_b²)` for the orthonormal basis.
    pub fn moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut var = 0.0;
        for (m, &a) in self.basis.indices().iter().zip(&self.coeffs) {
            if m.is_zero() {
                mean += a;
            } else {
                var += a * a;
            }
        }
        (mean, var)
    }

    /// Variance carried by each interaction subset (dimensions with nonzero degree).
    pub fn partial_variances(&self) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (m, &a) in self.basis.indices().iter().zip(&self.coeffs) {
            if !m.is_zero() {
                *out.entry(m.support().collect()).or_insert(0.0) += a * a;
            }
        }
        out
    }

    /// First-order and total Sobol' indices read off the coefficients.
    pub fn sobol(&self) -> SobolIndices {
        let n = self.basis.dim();
        let (_, var) = self.moments();
        let mut first = vec![0.0; n];
        let mut total = vec![0.0; n];
        if var > 0.0 {
            for (m, &a) in self.basis.indices().iter().zip(&self.coeffs) {
                let a2 = a * a;
                let mut support = m.support();
                let (Some(i), rest) = (support.next(), support.next()) else { continue };
                total[i] += a2;
                match rest {
                    None => first[i] += a2,
                    Some(j) => {
                        total[j] += a2;
                        for k in support {
                            total[k] += a2;
                        }
                    }
                }
            }
            first.iter_mut().chain(total.iter_mut()).for_each(|v| *v /= var);
        }
        SobolIndices {
            first_order: first,
            total,
            evaluation_count: 0,
            estimator: Estimator::PceCoefficients,
            zero_variance: var == 0.0,
        }
    }
}

/// Least-squares machinery for one design, reusable across response columns.
#[derive(Debug, Clone)]
pub struct PceFitter {
    space: ParameterSpace,
    basis: BasisSet,
    rows: Vec<usize>,
    qr: PivotedQr,
    hat: Vec<f64>,
}

impl PceFitter {
    /// `mask[i] == true` excludes design row `i` (a failed model run).
    pub fn new(space: &ParameterSpace, basis: &BasisSet, design: &DesignMatrix, mask: Option<&[bool]>) -> Result<Self> {
        if design.form != DesignForm::Standard {
            return Err(Error::InvalidArgument("regression needs a design in standard form".into()));
        }
        if design.dim() != basis.dim() || space.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: design.dim() });
        }
        if let Some(m) = mask {
            if m.len() != design.len() {
                return Err(Error::DimensionMismatch { expected: design.len(), found: m.len() });
            }
        }
        let rows: Vec<usize> = (0..design.len()).filter(|&i| !mask.is_some_and(|m| m[i])).collect();
        let p = basis.len();
        if rows.len() < p {
            return Err(Error::Underdetermined { samples: rows.len(), terms: p });
        }
        let mut psi = Matrix::zeros(rows.len(), p);
        let mut scratch = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            basis.eval_into(design.row(i), &mut scratch, psi.row_mut(r));
        }
        let qr = PivotedQr::new(&psi);
        let condition = qr.condition_estimate();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        let hat = qr.hat_diagonal();
        Ok(Self { space: space.clone(), basis: basis.clone(), rows, qr, hat })
    }

    pub fn samples(&self) -> usize {
        self.rows.len()
    }

    /// Fits one response column (aligned with the full design; masked rows ignored).
    pub fn fit(&self, y: &[f64]) -> Result<PceModel> {
        let ys: Vec<f64> = self.rows.iter().map(|&i| y.get(i).copied()).collect::<Option<_>>().ok_or(
            Error::DimensionMismatch { expected: self.rows.last().map_or(0, |r| r + 1), found: y.len() },
        )?;
        if ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite response in an unmasked row".into()));
        }
        let coeffs = self.qr.solve_least_squares(&ys);

        // residuals r = y - Ψa via the orthogonal complement: r = Q (0, (Qᵀy)_{P..})
        let p = self.basis.len();
        let mut c = ys.clone();
        self.qr.apply_qt(&mut c);
        c[..p].iter_mut().for_each(|v| *v = 0.0);
        self.qr.apply_q(&mut c);
        let residual_norm = crate::linalg::norm2(&c);

        let n = ys.len() as f64;
        let mean_y = ys.iter().sum::<f64>() / n;
        let var_y = ys.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / n;
        let mut loo = 0.0;
        for (r, h) in c.iter().zip(&self.hat) {
            let denom = 1.0 - h;
            loo += if denom > 1e-12 { (r / denom) * (r / denom) } else { f64::INFINITY };
        }
        loo /= n;
        if var_y > 0.0 {
            loo /= var_y;
        }

        let diagnostics = FitDiagnostics {
            samples: ys.len(),
            residual_norm,
            condition_estimate: self.qr.condition_estimate(),
            loo_error: loo,
        };
        Ok(PceModel::new(self.space.clone(), self.basis.clone(), coeffs)?.with_diagnostics(diagnostics))
    }
}

/// Least-squares PCE of one response column on a standard-form design.
pub fn fit_regression(
    space: &ParameterSpace,
    basis: &BasisSet,
    design: &DesignMatrix,
    y: &[f64],
    mask: Option<&[bool]>,
) -> Result<PceModel> {
    if y.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), found: y.len() });
    }
    PceFitter::new(space, basis, design, mask)?.fit(y)
}
